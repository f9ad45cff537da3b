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
#include <span>
#include <string>
#include <vector>

#include "msrec/dataset.hpp"

namespace msrec {

struct TrainConfig {
  int d = 32;
  double learning_rate = 0.01;
  double l2_reg = 0.05;
  int epochs = 20;
  std::uint64_t seed = 0;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Items in rank order with the score that produced the order. `truncated` is
// set when fewer than the requested number of items were available.
struct RankedList {
  std::vector<std::int32_t> items;
  std::vector<double> scores;
  bool truncated = false;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
};

// Biased matrix factorization:
//   score(u, i) = global_mean + b_u + b_i + <p_u, q_i>
class FactorModel {
 public:
  FactorModel() = default;
  FactorModel(std::size_t n_users, std::size_t n_items, int d,
              RatingScale scale, double global_mean);

  int d() const { return d_; }
  std::size_t n_users() const { return user_bias_.size(); }
  std::size_t n_items() const { return item_bias_.size(); }
  const RatingScale& scale() const { return scale_; }
  double global_mean() const { return global_mean_; }

  std::span<double> user_factors(std::int32_t u);
  std::span<const double> user_factors(std::int32_t u) const;
  std::span<double> item_factors(std::int32_t i);
  std::span<const double> item_factors(std::int32_t i) const;
  double& user_bias(std::int32_t u) { return user_bias_[u]; }
  double user_bias(std::int32_t u) const { return user_bias_[u]; }
  double& item_bias(std::int32_t i) { return item_bias_[i]; }
  double item_bias(std::int32_t i) const { return item_bias_[i]; }

  // Unclamped score, used for ranking. Throws LookupError on bad ids.
  double score(std::int32_t u, std::int32_t i) const;
  // Score clamped to the rating scale, used when reporting ratings.
  double predict_rating(std::int32_t u, std::int32_t i) const;

  bool all_finite() const;

  // Flat parameter views, in the order user factors, item factors,
  // user bias, item bias.
  std::span<const double> user_factor_block() const { return user_factors_; }
  std::span<const double> item_factor_block() const { return item_factors_; }

  TrainConfig config;  // echo of the config that produced the model

  friend bool operator==(const FactorModel&, const FactorModel&) = default;

 private:
  void check(std::int32_t u, std::int32_t i) const;

  int d_ = 1;
  RatingScale scale_;
  double global_mean_ = 0.0;
  std::vector<double> user_factors_;
  std::vector<double> item_factors_;
  std::vector<double> user_bias_;
  std::vector<double> item_bias_;
};

struct TrainReport {
  std::vector<double> epoch_rmse;  // training RMSE after each epoch
};

// Extra residual added to the SGD error of each training record during one
// epoch, indexed like the training dataset. Returning an empty vector means
// no offsets for that epoch.
using EpochOffsets =
    std::function<std::vector<double>(const FactorModel&, int epoch)>;

FactorModel train_mf(const RatingsDataset& train, const TrainConfig& cfg,
                     TrainReport* report = nullptr);

// Same SGD loop with per-epoch residual offsets. With a null callback the
// result is bit-identical to train_mf.
FactorModel train_mf_with_offsets(const RatingsDataset& train,
                                  const TrainConfig& cfg,
                                  const EpochOffsets& offsets,
                                  TrainReport* report = nullptr);

double rmse(const FactorModel& model, const RatingsDataset& ds);

// Per-rating objective 1/2 (r - s)^2 + l2/2 (|p|^2 + |q|^2 + b_u^2 + b_i^2)
// and its gradient; the SGD step is -learning_rate * gradient.
struct RatingGradient {
  std::vector<double> user_factors;
  std::vector<double> item_factors;
  double user_bias = 0.0;
  double item_bias = 0.0;
};

double rating_objective(const FactorModel& model, std::int32_t u,
                        std::int32_t i, double rating, double l2);
RatingGradient rating_gradient(const FactorModel& model, std::int32_t u,
                               std::int32_t i, double rating, double l2);

RankedList top_n(const FactorModel& model, std::int32_t user,
                 std::span<const std::int32_t> candidates, std::size_t n);

// Sorts by score descending, ascending item id on ties, and keeps the first n.
RankedList rank_by_score(std::span<const std::int32_t> items,
                         std::span<const double> scores, std::size_t n);

std::string model_text(const FactorModel& model);
void save_model(const std::filesystem::path& path, const FactorModel& model);
FactorModel load_model(const std::filesystem::path& path);

}  // namespace msrec
