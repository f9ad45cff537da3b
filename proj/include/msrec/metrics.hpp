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
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "msrec/dataset.hpp"
#include "msrec/mf.hpp"

namespace msrec {

// One held-out rating with the model's reported prediction for it.
struct TestRating {
  std::int32_t user = 0;
  std::int32_t item = 0;
  double rating = 0.0;
  double predicted = 0.0;
};

// Everything the stakeholder metrics look at: the recommendation lists L (one
// per evaluated user), the test ratings T, the provider catalogs I_p and each
// provider's target-market predicate g_p.
class EvalContext {
 public:
  using TargetPredicate =
      std::function<bool(std::int32_t provider, std::int32_t user)>;

  EvalContext(std::vector<std::int32_t> list_users,
              std::vector<std::vector<std::int32_t>> lists,
              std::vector<TestRating> test, std::vector<std::int32_t> provider_of,
              int n_providers, double relevance_threshold = 4.0,
              TargetPredicate target = nullptr);

  std::span<const std::int32_t> list_users() const { return list_users_; }
  std::span<const std::vector<std::int32_t>> lists() const { return lists_; }
  std::span<const TestRating> test() const { return test_; }
  std::span<const std::int32_t> provider_of() const { return provider_of_; }
  int n_providers() const { return n_providers_; }
  double relevance_threshold() const { return relevance_threshold_; }

  std::int32_t provider(std::int32_t item) const;
  bool in_target(std::int32_t provider, std::int32_t user) const;
  // Rating of (user, item) in T, if held out.
  std::optional<double> test_rating(std::int32_t user, std::int32_t item) const;
  bool relevant(std::int32_t user, std::int32_t item) const;
  // Number of relevant held-out items of a user.
  std::size_t n_relevant(std::int32_t user) const;

 private:
  std::vector<std::int32_t> list_users_;
  std::vector<std::vector<std::int32_t>> lists_;
  std::vector<TestRating> test_;
  std::vector<std::int32_t> provider_of_;
  int n_providers_;
  double relevance_threshold_;
  TargetPredicate target_;
  std::unordered_map<std::int32_t, std::unordered_map<std::int32_t, double>> by_user_;
};

// Provider metrics.
std::int64_t exposure(std::int32_t provider, const EvalContext& ctx);
// Exposure with each slot weighted by 1 / log2(1 + rank).
double discounted_exposure(std::int32_t provider, const EvalContext& ctx);
std::int64_t hits(std::int32_t provider, const EvalContext& ctx);
std::int64_t reach(std::int32_t provider, const EvalContext& ctx);
std::int64_t target_reach(std::int32_t provider, const EvalContext& ctx);

using PairMetric = std::function<double(double rating, double predicted)>;
double absolute_error(double rating, double predicted);
double squared_error(double rating, double predicted);

// Mean of m(r, r_hat) over the provider's test ratings T_p.
double p_accuracy(std::int32_t provider, const EvalContext& ctx,
                  const PairMetric& metric = absolute_error);

// List metrics. `relevant` holds the held-out relevant items of the user.
double precision_at_n(std::span<const std::int32_t> list, std::size_t n,
                      const std::function<bool(std::int32_t)>& relevant);
double f1_at_n(std::span<const std::int32_t> list, std::size_t n,
               const std::function<bool(std::int32_t)>& relevant,
               std::size_t n_relevant);
// Gain 2^grade - 1, discount log2(1 + rank). `ideal_grades` are the grades
// of every judged item, in any order.
double ndcg_at_n(std::span<const double> list_grades,
                 std::span<const double> ideal_grades, std::size_t n);

struct ConsumerMetrics {
  double rmse = 0.0;
  double f1_at_n = 0.0;
  double ndcg_at_n = 0.0;
  std::size_t n_users = 0;  // users with at least one relevant test item
};

struct PerUserConsumer {
  std::int32_t user = 0;
  double f1 = 0.0;
  double ndcg = 0.0;
};

// F1@n and NDCG@n per list whose user has at least one relevant test item.
std::vector<PerUserConsumer> per_user_consumer_metrics(const EvalContext& ctx,
                                                       std::size_t n);
ConsumerMetrics consumer_metrics(const EvalContext& ctx, std::size_t n);

struct FairnessRatio {
  double value = 1.0;
  bool infinite = false;   // group-1 rate is zero, group-0 rate positive
  bool undefined = false;  // both rates zero or a group has no providers
  double group0_rate = 0.0;
  double group1_rate = 0.0;
};

// Pr[Y=1 | S=0] / Pr[Y=1 | S=1] with Pr[Y=1] of a provider taken as
// Reach(p) / |L| and averaged over the providers of each group.
FairnessRatio fairness_ratio(std::span<const bool> provider_sensitive,
                             const EvalContext& ctx);

struct DistributionMoments {
  double mean = 0.0;
  double variance = 0.0;  // population
  double skewness = 0.0;  // standardized third moment
  bool skewness_flagged = false;  // variance < 1e-12, skewness reported as 0
};

DistributionMoments moments(std::span<const double> values);

struct ProviderRow {
  std::int32_t provider = 0;
  std::int64_t exposure = 0;
  std::int64_t hits = 0;
  std::int64_t reach = 0;
  std::int64_t target_reach = 0;
  std::optional<double> p_accuracy;  // empty when T_p is empty
};

std::vector<ProviderRow> provider_report(const EvalContext& ctx);

// provider_id,exposure,hits,reach,target_reach,p_accuracy followed by
// mean/variance/skewness rows over providers.
std::string provider_report_csv(std::span<const ProviderRow> rows);

}  // namespace msrec
