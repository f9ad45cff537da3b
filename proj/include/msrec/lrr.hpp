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
#include <span>
#include <string>
#include <vector>

#include "msrec/dataset.hpp"
#include "msrec/mf.hpp"

namespace msrec {

// ---------------------------------------------------------------------------
// Ranking primitives

// 1-based positions when sorted by score descending, ties by ascending index.
std::vector<int> ranks_of(std::span<const double> scores);

// (2^y_i - 2^y_j) * (ln(1 + rank_i) - ln(1 + rank_j)): the swap cost used to
// weight each LambdaRank pair.
double delta_ndcg(double y_i, double y_j, int rank_i, int rank_j);

// Sum over ordered pairs with y_i >= y_j of
//   ln(1 + exp(-theta (u_i - u_j))) * |delta_ndcg(i, j)|
// with ranks taken from `scores`.
double lambdarank_loss(std::span<const double> grades,
                       std::span<const double> scores, double theta);

// Same loss with externally supplied (frozen) ranks.
double lambdarank_loss_frozen(std::span<const double> grades,
                              std::span<const double> scores, double theta,
                              std::span<const int> ranks);

// d loss / d scores, ranks inside the swap cost held fixed at their values
// for `scores`.
std::vector<double> lambdarank_gradient(std::span<const double> grades,
                                        std::span<const double> scores,
                                        double theta);

// (n_concordant - n_discordant) / (n (n-1) / 2). Tied pairs count as neither.
double kendall_tau_exact(std::span<const double> u, std::span<const double> v);

// Pair-sign embedding, entries sign(u_i - u_j) / sqrt(C) for i < j in
// lexicographic order, C = n (n-1) / 2. <phi(u), phi(v)> is Kendall's tau.
std::vector<double> phi_map(std::span<const double> u);

// Smoothed embedding, entries (s(u_i - u_j) - s(u_j - u_i)) / sqrt(C) with
// s(x) = 1 / (1 + exp(-theta x)).
std::vector<double> phi_smooth(std::span<const double> u, double theta);

// <phi_map(u), phi_smooth(u_prime)>. The smooth side is differentiable.
double kendall_kernel(std::span<const double> u, std::span<const double> u_prime,
                      double theta);
// Gradient of kendall_kernel with respect to u_prime.
std::vector<double> kendall_kernel_gradient(std::span<const double> u,
                                            std::span<const double> u_prime,
                                            double theta);

// ---------------------------------------------------------------------------
// Value-aware re-ranking

// One candidate list to re-rank: base relevance probabilities in (0, 1],
// item economics, item features and graded margins.
struct RerankList {
  std::vector<std::int32_t> items;
  std::vector<double> base;    // u
  std::vector<double> price;   // p > 0
  std::vector<double> margin;  // 0 < m <= p
  std::vector<std::vector<double>> features;  // x_i, same width for all items
  std::vector<double> grades;  // margin grade per item

  std::size_t size() const { return base.size(); }
  void validate() const;
};

// beta(x, m) = w . [x; ln m] + b
struct LrrParams {
  double alpha = 0.0;
  std::vector<double> weights;  // n_features + 1, the last multiplies ln m
  double bias = 0.0;
  double gamma = 1.0;
  double theta_rank = 1.0;
  double theta_smooth = 10.0;
  int margin_grades = 5;

  void validate() const;
  double beta(std::span<const double> features, double margin) const;
};

// u'_i = ln u_i + alpha ln p_i + beta(x_i, m_i) ln(m_i / p_i)
std::vector<double> composite_score(const RerankList& list, const LrrParams& params);

// Maps one list of base-model scores into [eps, 1] by min-max over the list.
// Unclamped scores keep their order, so no ties are introduced.
std::vector<double> base_probabilities(std::span<const double> scores,
                                       double eps = kMarginEpsilon);

// Equal-frequency bucketing of margins into grades 0..n_grades-1.
class MarginGrader {
 public:
  MarginGrader() = default;
  MarginGrader(std::span<const double> margins, int n_grades);

  double grade(double margin) const;
  std::span<const double> cuts() const { return cuts_; }

 private:
  std::vector<double> cuts_;
};

double lrr_loss(std::span<const RerankList> batch, const LrrParams& params);

// Loss with LambdaRank ranks frozen per list (ranks[l] for list l).
double lrr_loss_frozen(std::span<const RerankList> batch, const LrrParams& params,
                       std::span<const std::vector<int>> ranks);

struct LrrGradient {
  std::vector<double> weights;
  double bias = 0.0;
};

// Gradient of lrr_loss w.r.t. the beta weights and bias, ranks frozen at the
// current composite scores.
LrrGradient lrr_loss_gradient(std::span<const RerankList> batch,
                              const LrrParams& params);

struct LrrOptimizer {
  double step = 0.1;  // length of one step in parameter space
  int iterations = 100;
  std::uint64_t seed = 0;  // jitter for a non-zero starting point
  double init_scale = 0.0;  // weights start at init + init_scale * N(0, 1)
  double tolerance = 1e-6;
  int max_halvings = 60;
};

struct LrrLogRow {
  int iteration = 0;
  double loss = 0.0;
  double mean_tau = 0.0;     // mean kendall_tau_exact(u, u') over lists
  double margin_ndcg = 0.0;  // mean margin-NDCG@10 of u'
};

struct LrrTrainResult {
  LrrParams params;
  std::vector<LrrLogRow> log;
};

// Gradient descent on beta (weights and bias) with backtracking so the
// recorded loss never increases; alpha, gamma and the thetas stay fixed.
LrrTrainResult train_lrr(std::span<const RerankList> batch, const LrrParams& init,
                         const LrrOptimizer& opt);

// Mean tau between base and composite order, and mean margin-NDCG@n of the
// composite order.
double mean_tau(std::span<const RerankList> batch, const LrrParams& params);
double margin_ndcg(std::span<const RerankList> batch, const LrrParams& params,
                   std::size_t n = 10);
double base_margin_ndcg(std::span<const RerankList> batch, std::size_t n = 10);

// Top-n of the list by composite score.
RankedList rerank_lrr(const RerankList& list, const LrrParams& params, std::size_t n);

std::string lrr_params_json(const LrrParams& params, const LrrOptimizer& opt);
LrrParams lrr_params_from_json(const std::string& text);
std::string lrr_log_csv(std::span<const LrrLogRow> log);

}  // namespace msrec
