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

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "msrec/errors.hpp"
#include "msrec/greedy_rerank.hpp"
#include "msrec/random.hpp"

using namespace msrec;

namespace {

RankedList list_of(std::vector<std::int32_t> items, std::vector<double> scores) {
  RankedList out;
  out.items = std::move(items);
  out.scores = std::move(scores);
  return out;
}

// Tries every ordered selection of N items and keeps the best by the
// lexicographic objective: eligible count, then margins slot by slot, then
// relevance position of the fill items.
std::vector<std::int32_t> brute_force(const RankedList& rel, const std::vector<double>& margin,
                                      double threshold, std::size_t n) {
  const std::size_t m = rel.size();
  std::vector<std::size_t> eligible, rest;
  for (std::size_t j = 0; j < m; ++j) {
    (rel.scores[j] >= threshold ? eligible : rest).push_back(j);
  }
  // Among eligible positions choose the subset and order maximizing
  // (margin, score, -item) slot by slot.
  auto key = [&](std::size_t j) {
    return std::make_tuple(margin[rel.items[j]], rel.scores[j], -rel.items[j]);
  };
  std::vector<std::size_t> perm = eligible;
  std::sort(perm.begin(), perm.end());
  std::vector<std::size_t> best;
  bool first = true;
  const std::size_t take = std::min(n, eligible.size());
  do {
    std::vector<std::size_t> head(perm.begin(), perm.begin() + static_cast<long>(take));
    bool better = first;
    if (!first) {
      for (std::size_t s = 0; s < take; ++s) {
        if (key(head[s]) != key(best[s])) {
          better = key(head[s]) > key(best[s]);
          break;
        }
      }
    }
    if (better) best = head;
    first = false;
  } while (std::next_permutation(perm.begin(), perm.end()));
  std::vector<std::int32_t> out;
  for (auto j : best) out.push_back(rel.items[j]);
  for (auto j : rest) {
    if (out.size() == std::min(n, m)) break;
    out.push_back(rel.items[j]);
  }
  return out;
}

}  // namespace

TEST_CASE("greedy example from the rule") {
  // A(4.8, 1.0) B(4.5, 3.5) C(4.2, 4.0) D(3.9, 4.0)
  const auto rel = list_of({0, 1, 2, 3}, {4.8, 4.5, 4.2, 3.9});
  const std::vector<double> margin = {1.0, 3.5, 4.0, 4.0};
  RerankConfig cfg;
  cfg.threshold = 4.0;
  cfg.list_size = 2;
  const auto out = rerank_by_profit(rel, margin, cfg);
  CHECK(out.items == std::vector<std::int32_t>{2, 1});
  CHECK(out.scores == std::vector<double>{4.2, 4.5});
}

TEST_CASE("fill rule and ties") {
  const auto rel = list_of({5, 2, 7}, {4.1, 3.8, 3.2});
  const std::vector<double> margin = {0, 0, 3.0, 0, 0, 1.0, 0, 2.0};
  RerankConfig cfg;
  cfg.threshold = 4.9;
  cfg.list_size = 3;
  CHECK(rerank_by_profit(rel, margin, cfg).items == rel.items);

  const std::vector<double> flat(8, 1.5);
  cfg.threshold = 3.0;
  CHECK(rerank_by_profit(rel, flat, cfg).items == rel.items);

  CHECK(rerank_by_profit(RankedList{}, margin, cfg).empty());
  cfg.list_size = 5;
  const auto out = rerank_by_profit(rel, margin, cfg);
  CHECK(out.size() == 3);
  CHECK(out.truncated);
}

TEST_CASE("greedy output matches exhaustive search") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + rng.index(6);
    std::vector<double> margin(12);
    for (auto& x : margin) x = std::round(rng.uniform() * 8.0) / 2.0;  // ties on purpose
    std::vector<std::int32_t> items(12);
    for (int k = 0; k < 12; ++k) items[k] = k;
    rng.shuffle(std::span<std::int32_t>(items));
    items.resize(m);
    std::vector<double> scores(m);
    for (auto& s : scores) s = 1.0 + std::round(rng.uniform() * 8.0) / 2.0;
    std::sort(scores.rbegin(), scores.rend());
    const auto rel = list_of(items, scores);
    RerankConfig cfg;
    cfg.threshold = 1.0 + rng.uniform() * 4.0;
    cfg.list_size = 1 + rng.index(m + 1);
    CHECK(rerank_by_profit(rel, margin, cfg).items ==
          brute_force(rel, margin, cfg.threshold, cfg.list_size));
  }
}

TEST_CASE("re-ranking properties") {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t m = 1 + rng.index(25);
    std::vector<double> margin(40);
    for (auto& x : margin) x = rng.uniform() * 4.0;
    std::vector<std::int32_t> items(40);
    for (int k = 0; k < 40; ++k) items[k] = k;
    rng.shuffle(std::span<std::int32_t>(items));
    items.resize(m);
    std::vector<double> scores(m);
    for (auto& s : scores) s = 1.0 + rng.uniform() * 4.0;
    std::sort(scores.rbegin(), scores.rend());
    const auto rel = list_of(items, scores);

    RerankConfig lo_cfg, hi_cfg;
    lo_cfg.list_size = hi_cfg.list_size = 1 + rng.index(12);
    lo_cfg.threshold = 1.0 + rng.uniform() * 4.0;
    hi_cfg.threshold = lo_cfg.threshold + rng.uniform();
    const auto out = rerank_by_profit(rel, margin, lo_cfg);

    // A permutation of a subset, no repeats.
    std::set<std::int32_t> seen(out.items.begin(), out.items.end());
    CHECK(seen.size() == out.size());
    for (auto i : out.items) {
      CHECK(std::find(items.begin(), items.end(), i) != items.end());
    }

    // Raising the threshold never enlarges the eligible set.
    std::size_t lo_eligible = 0, hi_eligible = 0;
    for (double s : scores) {
      lo_eligible += s >= lo_cfg.threshold ? 1 : 0;
      hi_eligible += s >= hi_cfg.threshold ? 1 : 0;
    }
    CHECK(hi_eligible <= lo_eligible);

    // Guaranteed profit is never below the relevance list when something is eligible.
    if (lo_eligible > 0) {
      RankedList head = rel;
      head.items.resize(std::min(m, lo_cfg.list_size));
      head.scores.resize(head.items.size());
      const auto g = PurchaseModel::guaranteed();
      CHECK(expected_profit_per_user(out, margin, g) >=
            expected_profit_per_user(head, margin, g) - 1e-12);
    }
  }
}

TEST_CASE("purchase probabilities") {
  const auto decay = PurchaseModel::decay();
  CHECK(purchase_probability(5.0, decay) == doctest::Approx(0.1));
  CHECK(purchase_probability(3.0, decay) == doctest::Approx(0.004979).epsilon(1e-4));
  CHECK(purchase_probability(2.7, PurchaseModel::guaranteed()) == 1.0);
  double prev = 0.0;
  for (double r = 1.0; r <= 5.0; r += 0.25) {
    const double p = purchase_probability(r, decay);
    CHECK(p >= prev);
    CHECK(p <= 1.0);
    prev = p;
  }
  CHECK_THROWS_AS(PurchaseModel::decay(0.5).validate(), ConfigError);
  CHECK_THROWS_AS(PurchaseModel::decay(-1.5, 0.0).validate(), ConfigError);
  CHECK_THROWS_AS(PurchaseModel::decay(-1.5, 1.5).validate(), ConfigError);
}

TEST_CASE("expected profit examples") {
  const std::vector<double> margin = {1.0, 3.0, 2.0};
  CHECK(expected_profit_per_user(list_of({0, 1}, {4.0, 4.0}), margin,
                                 PurchaseModel::guaranteed()) == 2.0);
  CHECK(expected_profit_per_user(list_of({2}, {5.0}), margin, PurchaseModel::decay()) ==
        doctest::Approx(0.2));
  CHECK(expected_profit_per_user(RankedList{}, margin, PurchaseModel::decay()) == 0.0);
}

TEST_CASE("sweep rows and baseline") {
  const auto ds = parse_ratings(
      "1 1 5\n1 2 4\n1 3 2\n1 4 5\n2 1 3\n2 2 5\n2 3 4\n2 4 1\n"
      "3 1 4\n3 2 2\n3 3 5\n3 4 4\n4 1 5\n4 2 3\n4 3 4\n4 4 2\n",
      RatingFormat::kTab);
  const auto tt = materialize(ds, split_random_kfold(ds, 2, 3), 0);
  TrainConfig cfg;
  cfg.d = 2;
  cfg.epochs = 30;
  const auto model = train_mf(tt.train, cfg);
  const std::vector<double> margin = {0.5, 3.5, 2.0, 1.0};
  SweepSpec spec;
  spec.thresholds = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  spec.list_size = 2;
  const auto rows = sweep_threshold(model, tt.train, tt.test, margin, spec);
  REQUIRE(rows.size() == 7);
  CHECK_FALSE(rows[0].threshold.has_value());
  // Above the scale nothing is eligible, so the row equals the baseline.
  CHECK(rows[6].avg_profit == rows[0].avg_profit);
  CHECK(rows[6].f1_at_n == rows[0].f1_at_n);
  CHECK(rows[6].ndcg_at_n == rows[0].ndcg_at_n);
  for (std::size_t r = 2; r < rows.size(); ++r) {
    CHECK(rows[r].avg_profit <= rows[r - 1].avg_profit + 1e-12);
  }
  spec.threads = 3;
  const auto again = sweep_threshold(model, tt.train, tt.test, margin, spec);
  CHECK(sweep_csv(again) == sweep_csv(rows));
  CHECK(sweep_csv(rows).rfind("threshold,avg_profit,f1_at_n,ndcg_at_n\nnone,", 0) == 0);
}
