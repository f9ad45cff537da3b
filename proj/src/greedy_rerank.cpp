// Copyright 2026 The msrec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "msrec/greedy_rerank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "msrec/errors.hpp"
#include "msrec/io.hpp"
#include "msrec/metrics.hpp"
#include "msrec/parallel.hpp"

namespace msrec {

void RerankConfig::validate(const RatingScale& scale) const {
  if (list_size < 1) throw ConfigError("list size N must be >= 1");
  // One step above the scale is allowed: it disables re-ranking.
  if (!(threshold >= scale.min) || !std::isfinite(threshold)) {
    throw ConfigError("threshold T_R below the rating scale");
  }
}

void PurchaseModel::validate() const {
  if (kind == Kind::kGuaranteed) return;
  if (!(base_prob > 0.0 && base_prob <= 1.0)) {
    throw ConfigError("decay base probability must lie in (0, 1]");
  }
  if (!(alpha < 0.0)) throw ConfigError("decay alpha must be < 0");
}

RankedList rerank_by_profit(const RankedList& relevance,
                            std::span<const double> margin,
                            const RerankConfig& cfg) {
  RankedList out;
  if (relevance.empty()) return out;
  const std::size_t n = relevance.size();
  std::vector<std::size_t> eligible, rest;
  for (std::size_t j = 0; j < n; ++j) {
    const auto item = relevance.items[j];
    if (item < 0 || static_cast<std::size_t>(item) >= margin.size()) {
      throw ContractError("item without margin");
    }
    (relevance.scores[j] >= cfg.threshold ? eligible : rest).push_back(j);
  }
  std::stable_sort(eligible.begin(), eligible.end(), [&](std::size_t a, std::size_t b) {
    const double ma = margin[relevance.items[a]];
    const double mb = margin[relevance.items[b]];
    if (ma != mb) return ma > mb;
    if (relevance.scores[a] != relevance.scores[b]) {
      return relevance.scores[a] > relevance.scores[b];
    }
    return relevance.items[a] < relevance.items[b];
  });
  const std::size_t target = std::min(cfg.list_size, n);
  out.truncated = cfg.list_size > n;
  for (const auto* pool : {&eligible, &rest}) {
    for (const auto j : *pool) {
      if (out.size() == target) break;
      out.items.push_back(relevance.items[j]);
      out.scores.push_back(relevance.scores[j]);
    }
  }
  return out;
}

double purchase_probability(double predicted_rating, const PurchaseModel& model) {
  if (model.kind == PurchaseModel::Kind::kGuaranteed) return 1.0;
  const double r = std::min(predicted_rating, model.top_rating);
  const double p = model.base_prob * std::exp(model.alpha * (model.top_rating - r));
  return std::clamp(p, 0.0, 1.0);
}

double expected_profit_per_user(const RankedList& list,
                                std::span<const double> margin,
                                const PurchaseModel& model) {
  if (list.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t j = 0; j < list.size(); ++j) {
    const double m = margin[static_cast<std::size_t>(list.items[j])];
    total += model.kind == PurchaseModel::Kind::kGuaranteed
                 ? m
                 : purchase_probability(list.scores[j], model) * m;
  }
  if (model.kind == PurchaseModel::Kind::kGuaranteed) {
    total /= static_cast<double>(list.size());
  }
  return total;
}

std::vector<std::vector<std::int32_t>> candidate_items(
    const RatingsDataset& train, const RatingsDataset& test,
    CandidatePolicy policy) {
  const std::size_t n_users = train.n_users();
  const std::size_t n_items = train.n_items();
  std::vector<std::vector<std::int32_t>> out(n_users);
  if (policy == CandidatePolicy::kTestItems) {
    for (std::size_t k = 0; k < test.size(); ++k) {
      out[test.user_of(k)].push_back(test.item_of(k));
    }
    for (auto& c : out) std::sort(c.begin(), c.end());
    return out;
  }
  std::vector<std::vector<bool>> rated(n_users);
  for (std::size_t k = 0; k < train.size(); ++k) {
    auto& row = rated[train.user_of(k)];
    if (row.empty()) row.assign(n_items, false);
    row[train.item_of(k)] = true;
  }
  for (std::size_t u = 0; u < n_users; ++u) {
    for (std::size_t i = 0; i < n_items; ++i) {
      if (rated[u].empty() || !rated[u][i]) out[u].push_back(static_cast<std::int32_t>(i));
    }
  }
  return out;
}

namespace {

struct UserSweep {
  std::vector<double> profit, f1, ndcg;
  bool has_relevant = false;
};

}  // namespace

std::vector<SweepRow> sweep_threshold(const FactorModel& model,
                                      const RatingsDataset& train,
                                      const RatingsDataset& test,
                                      std::span<const double> margin,
                                      const SweepSpec& spec) {
  if (spec.thresholds.empty()) throw ConfigError("threshold grid is empty");
  spec.purchase.validate();
  if (margin.size() != train.n_items()) {
    throw ContractError("one margin per item required");
  }

  std::vector<std::unordered_map<std::int32_t, double>> held_out(train.n_users());
  for (std::size_t k = 0; k < test.size(); ++k) {
    held_out[test.user_of(k)][test.item_of(k)] = test.records()[k].rating;
  }
  std::vector<std::int32_t> users;
  for (std::size_t u = 0; u < held_out.size(); ++u) {
    if (!held_out[u].empty()) users.push_back(static_cast<std::int32_t>(u));
  }
  const auto candidates = candidate_items(train, test, spec.candidates);
  const std::size_t columns = spec.thresholds.size() + 1;

  std::vector<UserSweep> per_user(users.size());
  parallel_for(users.size(), spec.threads, [&](std::size_t idx) {
    const auto user = users[idx];
    const auto& ratings = held_out[user];
    auto is_rel = [&](std::int32_t i) {
      const auto it = ratings.find(i);
      return it != ratings.end() && it->second >= spec.relevance_threshold;
    };
    std::size_t n_rel = 0;
    for (const auto& [item, r] : ratings) n_rel += r >= spec.relevance_threshold ? 1 : 0;

    const auto& cand = candidates[user];
    const RankedList relevance = top_n(model, user, cand, cand.size());
    auto& out = per_user[idx];
    out.has_relevant = n_rel > 0;
    for (std::size_t c = 0; c < columns; ++c) {
      RankedList list;
      if (c == 0) {
        list.items.assign(relevance.items.begin(),
                          relevance.items.begin() +
                              static_cast<std::ptrdiff_t>(std::min(spec.list_size, relevance.size())));
        list.scores.assign(relevance.scores.begin(),
                           relevance.scores.begin() + static_cast<std::ptrdiff_t>(list.items.size()));
      } else {
        list = rerank_by_profit(relevance, margin,
                                RerankConfig{spec.thresholds[c - 1], spec.list_size});
      }
      out.profit.push_back(expected_profit_per_user(list, margin, spec.purchase));
      if (out.has_relevant) {
        std::vector<double> grades;
        for (const auto i : list.items) grades.push_back(is_rel(i) ? 1.0 : 0.0);
        out.f1.push_back(f1_at_n(list.items, spec.list_size, is_rel, n_rel));
        out.ndcg.push_back(ndcg_at_n(grades, std::vector<double>(n_rel, 1.0), spec.list_size));
      }
    }
  });

  std::vector<SweepRow> rows(columns);
  std::size_t n_rel_users = 0;
  for (const auto& u : per_user) {
    for (std::size_t c = 0; c < columns; ++c) rows[c].avg_profit += u.profit[c];
    if (!u.has_relevant) continue;
    ++n_rel_users;
    for (std::size_t c = 0; c < columns; ++c) {
      rows[c].f1_at_n += u.f1[c];
      rows[c].ndcg_at_n += u.ndcg[c];
    }
  }
  for (std::size_t c = 0; c < columns; ++c) {
    if (c > 0) rows[c].threshold = spec.thresholds[c - 1];
    if (!per_user.empty()) rows[c].avg_profit /= static_cast<double>(per_user.size());
    if (n_rel_users > 0) {
      rows[c].f1_at_n /= static_cast<double>(n_rel_users);
      rows[c].ndcg_at_n /= static_cast<double>(n_rel_users);
    }
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << "threshold,avg_profit,f1_at_n,ndcg_at_n\n";
  for (const auto& r : rows) {
    out << (r.threshold ? io::format_double(*r.threshold) : std::string("none"))
        << ',' << io::format_double(r.avg_profit) << ','
        << io::format_double(r.f1_at_n) << ',' << io::format_double(r.ndcg_at_n)
        << '\n';
  }
  return out.str();
}

}  // namespace msrec
