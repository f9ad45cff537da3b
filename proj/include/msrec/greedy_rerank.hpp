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
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msrec/dataset.hpp"
#include "msrec/mf.hpp"

namespace msrec {

struct RerankConfig {
  double threshold = 4.5;     // minimum predicted rating T_R
  std::size_t list_size = 10;  // N

  void validate(const RatingScale& scale) const;
};

struct PurchaseModel {
  enum class Kind { kGuaranteed, kDecay };

  Kind kind = Kind::kGuaranteed;
  double alpha = -1.5;      // decay rate, must be < 0
  double base_prob = 0.1;   // purchase probability at the top rating
  double top_rating = 5.0;  // rating at which base_prob applies

  static PurchaseModel guaranteed() { return {}; }
  static PurchaseModel decay(double alpha = -1.5, double base_prob = 0.1,
                             double top_rating = 5.0) {
    return {Kind::kDecay, alpha, base_prob, top_rating};
  }
  void validate() const;
};

// Greedy profit re-ranking: among candidates predicted at or above the
// threshold, the highest-margin ones move to the top (ties by predicted
// rating, then item id). Short lists are filled from the remaining
// candidates in relevance order. `relevance` must be sorted by predicted
// rating, descending; `margin` is indexed by item.
RankedList rerank_by_profit(const RankedList& relevance,
                            std::span<const double> margin,
                            const RerankConfig& cfg);

// base_prob * exp(alpha * (top_rating - r)), clamped to [0, 1].
double purchase_probability(double predicted_rating, const PurchaseModel& model);

// Guaranteed purchase: mean margin of the list (one uniformly chosen pick).
// Decay: sum of purchase_probability(r_i) * m_i, purchases independent.
// list.scores carry the predicted ratings. Empty list -> 0.
double expected_profit_per_user(const RankedList& list,
                                std::span<const double> margin,
                                const PurchaseModel& model);

enum class CandidatePolicy {
  kAllUnrated,  // every item the user has not rated in training
  kTestItems,   // only the user's held-out items
};

struct SweepRow {
  std::optional<double> threshold;  // empty for the no-rerank baseline
  double avg_profit = 0.0;
  double f1_at_n = 0.0;
  double ndcg_at_n = 0.0;
};

struct SweepSpec {
  std::vector<double> thresholds;
  PurchaseModel purchase;
  std::size_t list_size = 10;
  double relevance_threshold = 4.0;
  CandidatePolicy candidates = CandidatePolicy::kAllUnrated;
  int threads = 1;
};

// First row is the baseline (relevance order), then one row per threshold.
// Profit is averaged over every user with test ratings; F1/NDCG over users
// with at least one relevant test rating.
std::vector<SweepRow> sweep_threshold(const FactorModel& model,
                                      const RatingsDataset& train,
                                      const RatingsDataset& test,
                                      std::span<const double> margin,
                                      const SweepSpec& spec);

// threshold,avg_profit,f1_at_n,ndcg_at_n with the baseline labelled "none".
std::string sweep_csv(std::span<const SweepRow> rows);

// Candidate items per dense user id under the given policy.
std::vector<std::vector<std::int32_t>> candidate_items(
    const RatingsDataset& train, const RatingsDataset& test,
    CandidatePolicy policy);

}  // namespace msrec
