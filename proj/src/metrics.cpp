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
#include "msrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "msrec/errors.hpp"
#include "msrec/io.hpp"

namespace msrec {

EvalContext::EvalContext(std::vector<std::int32_t> list_users,
                         std::vector<std::vector<std::int32_t>> lists,
                         std::vector<TestRating> test,
                         std::vector<std::int32_t> provider_of, int n_providers,
                         double relevance_threshold, TargetPredicate target)
    : list_users_(std::move(list_users)),
      lists_(std::move(lists)),
      test_(std::move(test)),
      provider_of_(std::move(provider_of)),
      n_providers_(n_providers),
      relevance_threshold_(relevance_threshold),
      target_(std::move(target)) {
  if (list_users_.size() != lists_.size()) {
    throw ContractError("one user per recommendation list required");
  }
  for (const auto p : provider_of_) {
    if (p < 0 || p >= n_providers_) throw ContractError("provider id out of range");
  }
  for (const auto& list : lists_) {
    for (const auto i : list) {
      if (i < 0 || static_cast<std::size_t>(i) >= provider_of_.size()) {
        throw ContractError("recommendation list references unknown item");
      }
    }
  }
  for (const auto& t : test_) by_user_[t.user][t.item] = t.rating;
}

std::int32_t EvalContext::provider(std::int32_t item) const {
  return provider_of_.at(static_cast<std::size_t>(item));
}

bool EvalContext::in_target(std::int32_t provider, std::int32_t user) const {
  return target_ ? target_(provider, user) : true;
}

std::optional<double> EvalContext::test_rating(std::int32_t user,
                                               std::int32_t item) const {
  const auto u = by_user_.find(user);
  if (u == by_user_.end()) return std::nullopt;
  const auto i = u->second.find(item);
  if (i == u->second.end()) return std::nullopt;
  return i->second;
}

bool EvalContext::relevant(std::int32_t user, std::int32_t item) const {
  const auto r = test_rating(user, item);
  return r && *r >= relevance_threshold_;
}

std::size_t EvalContext::n_relevant(std::int32_t user) const {
  const auto u = by_user_.find(user);
  if (u == by_user_.end()) return 0;
  std::size_t n = 0;
  for (const auto& [item, r] : u->second) n += r >= relevance_threshold_ ? 1 : 0;
  return n;
}

std::int64_t exposure(std::int32_t provider, const EvalContext& ctx) {
  std::int64_t count = 0;
  for (const auto& list : ctx.lists()) {
    for (const auto i : list) count += ctx.provider(i) == provider ? 1 : 0;
  }
  return count;
}

double discounted_exposure(std::int32_t provider, const EvalContext& ctx) {
  double total = 0.0;
  for (const auto& list : ctx.lists()) {
    for (std::size_t r = 0; r < list.size(); ++r) {
      if (ctx.provider(list[r]) == provider) {
        total += 1.0 / std::log2(static_cast<double>(r) + 2.0);
      }
    }
  }
  return total;
}

std::int64_t hits(std::int32_t provider, const EvalContext& ctx) {
  std::int64_t count = 0;
  for (std::size_t l = 0; l < ctx.lists().size(); ++l) {
    const auto user = ctx.list_users()[l];
    for (const auto i : ctx.lists()[l]) {
      if (ctx.provider(i) == provider && ctx.relevant(user, i)) ++count;
    }
  }
  return count;
}

namespace {

bool list_has_provider(const std::vector<std::int32_t>& list,
                       std::int32_t provider, const EvalContext& ctx) {
  return std::any_of(list.begin(), list.end(),
                     [&](std::int32_t i) { return ctx.provider(i) == provider; });
}

}  // namespace

std::int64_t reach(std::int32_t provider, const EvalContext& ctx) {
  std::int64_t count = 0;
  for (const auto& list : ctx.lists()) {
    count += list_has_provider(list, provider, ctx) ? 1 : 0;
  }
  return count;
}

std::int64_t target_reach(std::int32_t provider, const EvalContext& ctx) {
  std::int64_t count = 0;
  for (std::size_t l = 0; l < ctx.lists().size(); ++l) {
    if (list_has_provider(ctx.lists()[l], provider, ctx) &&
        ctx.in_target(provider, ctx.list_users()[l])) {
      ++count;
    }
  }
  return count;
}

double absolute_error(double rating, double predicted) {
  return std::abs(rating - predicted);
}

double squared_error(double rating, double predicted) {
  return (rating - predicted) * (rating - predicted);
}

double p_accuracy(std::int32_t provider, const EvalContext& ctx,
                  const PairMetric& metric) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& t : ctx.test()) {
    if (ctx.provider(t.item) != provider) continue;
    sum += metric(t.rating, t.predicted);
    ++n;
  }
  if (n == 0) {
    throw UndefinedMetricError("provider " + std::to_string(provider) +
                               " has no test ratings");
  }
  return sum / static_cast<double>(n);
}

double precision_at_n(std::span<const std::int32_t> list, std::size_t n,
                      const std::function<bool(std::int32_t)>& relevant) {
  if (n == 0) return 0.0;
  std::size_t hit = 0;
  for (std::size_t r = 0; r < std::min(n, list.size()); ++r) hit += relevant(list[r]) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(n);
}

double f1_at_n(std::span<const std::int32_t> list, std::size_t n,
               const std::function<bool(std::int32_t)>& relevant,
               std::size_t n_relevant) {
  if (n == 0 || n_relevant == 0) return 0.0;
  std::size_t hit = 0;
  for (std::size_t r = 0; r < std::min(n, list.size()); ++r) hit += relevant(list[r]) ? 1 : 0;
  if (hit == 0) return 0.0;
  const double precision = static_cast<double>(hit) / static_cast<double>(n);
  const double recall = static_cast<double>(hit) / static_cast<double>(n_relevant);
  return 2.0 * precision * recall / (precision + recall);
}

double ndcg_at_n(std::span<const double> list_grades,
                 std::span<const double> ideal_grades, std::size_t n) {
  auto dcg = [n](std::span<const double> grades) {
    double total = 0.0;
    for (std::size_t r = 0; r < std::min(n, grades.size()); ++r) {
      total += (std::exp2(grades[r]) - 1.0) / std::log2(static_cast<double>(r) + 2.0);
    }
    return total;
  };
  std::vector<double> ideal(ideal_grades.begin(), ideal_grades.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg(ideal);
  if (idcg <= 0.0) return 0.0;
  return dcg(list_grades) / idcg;
}

std::vector<PerUserConsumer> per_user_consumer_metrics(const EvalContext& ctx,
                                                       std::size_t n) {
  std::vector<PerUserConsumer> out;
  for (std::size_t l = 0; l < ctx.lists().size(); ++l) {
    const auto user = ctx.list_users()[l];
    const std::size_t n_rel = ctx.n_relevant(user);
    if (n_rel == 0) continue;
    const auto& list = ctx.lists()[l];
    auto is_rel = [&](std::int32_t i) { return ctx.relevant(user, i); };
    std::vector<double> grades;
    grades.reserve(list.size());
    for (const auto i : list) grades.push_back(is_rel(i) ? 1.0 : 0.0);
    const std::vector<double> ideal(n_rel, 1.0);
    out.push_back({user, f1_at_n(list, n, is_rel, n_rel), ndcg_at_n(grades, ideal, n)});
  }
  return out;
}

ConsumerMetrics consumer_metrics(const EvalContext& ctx, std::size_t n) {
  ConsumerMetrics m;
  double sse = 0.0;
  for (const auto& t : ctx.test()) sse += squared_error(t.rating, t.predicted);
  m.rmse = ctx.test().empty() ? 0.0 : std::sqrt(sse / static_cast<double>(ctx.test().size()));
  const auto per_user = per_user_consumer_metrics(ctx, n);
  for (const auto& u : per_user) {
    m.f1_at_n += u.f1;
    m.ndcg_at_n += u.ndcg;
  }
  m.n_users = per_user.size();
  if (m.n_users > 0) {
    m.f1_at_n /= static_cast<double>(m.n_users);
    m.ndcg_at_n /= static_cast<double>(m.n_users);
  }
  return m;
}

FairnessRatio fairness_ratio(std::span<const bool> provider_sensitive,
                             const EvalContext& ctx) {
  if (provider_sensitive.size() != static_cast<std::size_t>(ctx.n_providers())) {
    throw ContractError("one sensitive flag per provider required");
  }
  FairnessRatio out;
  const double n_lists = static_cast<double>(ctx.lists().size());
  double rate[2] = {0.0, 0.0};
  std::size_t count[2] = {0, 0};
  for (int p = 0; p < ctx.n_providers(); ++p) {
    const int s = provider_sensitive[static_cast<std::size_t>(p)] ? 1 : 0;
    rate[s] += n_lists > 0 ? static_cast<double>(reach(p, ctx)) / n_lists : 0.0;
    ++count[s];
  }
  if (count[0] == 0 || count[1] == 0) {
    out.undefined = true;
    out.value = std::nan("");
    return out;
  }
  out.group0_rate = rate[0] / static_cast<double>(count[0]);
  out.group1_rate = rate[1] / static_cast<double>(count[1]);
  if (out.group1_rate == 0.0) {
    if (out.group0_rate == 0.0) {
      out.undefined = true;
      out.value = std::nan("");
    } else {
      out.infinite = true;
      out.value = HUGE_VAL;
    }
    return out;
  }
  out.value = out.group0_rate / out.group1_rate;
  return out;
}

DistributionMoments moments(std::span<const double> values) {
  DistributionMoments m;
  if (values.empty()) {
    m.skewness_flagged = true;
    return m;
  }
  const double n = static_cast<double>(values.size());
  for (const double x : values) m.mean += x;
  m.mean /= n;
  double m2 = 0.0, m3 = 0.0;
  for (const double x : values) {
    const double d = x - m.mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m.variance = m2;
  if (m2 < 1e-12) {
    m.skewness_flagged = true;
    m.skewness = 0.0;
  } else {
    m.skewness = m3 / std::pow(m2, 1.5);
  }
  return m;
}

std::vector<ProviderRow> provider_report(const EvalContext& ctx) {
  std::vector<ProviderRow> rows;
  rows.reserve(static_cast<std::size_t>(ctx.n_providers()));
  for (int p = 0; p < ctx.n_providers(); ++p) {
    ProviderRow row;
    row.provider = p;
    row.exposure = exposure(p, ctx);
    row.hits = hits(p, ctx);
    row.reach = reach(p, ctx);
    row.target_reach = target_reach(p, ctx);
    try {
      row.p_accuracy = p_accuracy(p, ctx);
    } catch (const UndefinedMetricError&) {
      row.p_accuracy.reset();
    }
    rows.push_back(row);
  }
  return rows;
}

std::string provider_report_csv(std::span<const ProviderRow> rows) {
  std::ostringstream out;
  out << "provider_id,exposure,hits,reach,target_reach,p_accuracy\n";
  std::vector<double> exp, hit, rch, trch, acc;
  for (const auto& r : rows) {
    out << r.provider << ',' << r.exposure << ',' << r.hits << ',' << r.reach
        << ',' << r.target_reach << ','
        << (r.p_accuracy ? io::format_double(*r.p_accuracy) : std::string("nan"))
        << '\n';
    exp.push_back(static_cast<double>(r.exposure));
    hit.push_back(static_cast<double>(r.hits));
    rch.push_back(static_cast<double>(r.reach));
    trch.push_back(static_cast<double>(r.target_reach));
    if (r.p_accuracy) acc.push_back(*r.p_accuracy);
  }
  const DistributionMoments m[] = {moments(exp), moments(hit), moments(rch),
                                   moments(trch), moments(acc)};
  const char* names[] = {"mean", "variance", "skewness"};
  for (int k = 0; k < 3; ++k) {
    out << names[k];
    for (const auto& mm : m) {
      const double v = k == 0 ? mm.mean : (k == 1 ? mm.variance : mm.skewness);
      out << ',' << io::format_double(v);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace msrec
