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

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msrec/dataset.hpp"
#include "msrec/metrics.hpp"
#include "msrec/mf.hpp"

namespace msrec {

enum class IndependenceTerm { kMeanMatching, kBhattacharyya, kMutualInformation };

IndependenceTerm parse_independence_term(std::string_view name);
std::string to_string(IndependenceTerm term);

struct FairnessConfig {
  double eta = 0.0;  // weight of the independence term
  // L2 weight; when unset the base TrainConfig's l2_reg is used.
  std::optional<double> lambda;
  IndependenceTerm term = IndependenceTerm::kMeanMatching;

  void validate() const;
};

// Predicted ratings split by the sensitive value of the rated item.
struct GroupedPredictions {
  std::vector<double> group0;
  std::vector<double> group1;
};

inline constexpr double kVarianceFloor = 1e-6;

// All three terms are <= 0 and reach 0 when the (estimated) group
// distributions coincide. Larger means fairer.

// -(mean(D0) - mean(D1))^2
double indep_mean_matching(const GroupedPredictions& g);
// Minus the Bhattacharyya distance between Gaussian fits of D0 and D1.
double indep_bhattacharyya(const GroupedPredictions& g);
// Minus the mutual information between prediction and group under Gaussian
// fits: -(H(Y) - sum_s Pr[s] H(Y | s)), H = 1/2 ln(2 pi e var).
double indep_mutual_info(const GroupedPredictions& g);

double independence(IndependenceTerm term, const GroupedPredictions& g);

// Gradient of the term with respect to every prediction in each group.
GroupedPredictions independence_gradient(IndependenceTerm term,
                                         const GroupedPredictions& g);

// Minimizes  sum 1/2 (r - r_hat)^2 - eta * indep(r_hat, s) + lambda/2 |theta|^2
// with the SGD loop of train_mf. The independence gradient is computed once per
// epoch from full-batch group statistics. `item_sensitive` is indexed by
// dense item id.
FactorModel train_fair_mf(const RatingsDataset& train,
                          std::span<const bool> item_sensitive,
                          const TrainConfig& cfg, const FairnessConfig& fair,
                          TrainReport* report = nullptr);

// Groups the model's unclamped scores on `ds` by item sensitivity.
GroupedPredictions group_predictions(const FactorModel& model,
                                     const RatingsDataset& ds,
                                     std::span<const bool> item_sensitive,
                                     bool clamp = false);

struct AbsoluteUnfairness {
  double value = 0.0;
  std::size_t users = 0;    // users contributing
  std::size_t skipped = 0;  // users lacking one of the item groups
};

// Mean over users of | |E0[r_hat] - E1[r_hat]| - |E0[r] - E1[r]| | where E_s is
// the user's mean over test items with sensitive value s.
AbsoluteUnfairness absolute_unfairness(std::span<const TestRating> test,
                                       std::span<const bool> item_sensitive);

}  // namespace msrec
