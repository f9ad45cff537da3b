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
#include "msrec/lrr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "msrec/errors.hpp"
#include "msrec/io.hpp"
#include "msrec/metrics.hpp"
#include "msrec/random.hpp"

namespace msrec {

namespace {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void require_same_length(std::size_t a, std::size_t b) {
  if (a != b) {
    throw ContractError("length mismatch: " + std::to_string(a) + " vs " +
                        std::to_string(b));
  }
}

int sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

std::vector<int> ranks_of(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<int> rank(scores.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    rank[order[pos]] = static_cast<int>(pos) + 1;
  }
  return rank;
}

double delta_ndcg(double y_i, double y_j, int rank_i, int rank_j) {
  return (std::exp2(y_i) - std::exp2(y_j)) *
         (std::log(1.0 + rank_i) - std::log(1.0 + rank_j));
}

double lambdarank_loss_frozen(std::span<const double> grades,
                              std::span<const double> scores, double theta,
                              std::span<const int> ranks) {
  require_same_length(grades.size(), scores.size());
  require_same_length(ranks.size(), scores.size());
  double loss = 0.0;
  const std::size_t n = scores.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      // Pairs with equal grades carry zero swap cost.
      if (i == j || !(grades[i] > grades[j])) continue;
      const double w = std::abs(delta_ndcg(grades[i], grades[j], ranks[i], ranks[j]));
      loss += softplus(-theta * (scores[i] - scores[j])) * w;
    }
  }
  return loss;
}

double lambdarank_loss(std::span<const double> grades,
                       std::span<const double> scores, double theta) {
  require_same_length(grades.size(), scores.size());
  const auto ranks = ranks_of(scores);
  return lambdarank_loss_frozen(grades, scores, theta, ranks);
}

std::vector<double> lambdarank_gradient(std::span<const double> grades,
                                        std::span<const double> scores,
                                        double theta) {
  require_same_length(grades.size(), scores.size());
  const auto ranks = ranks_of(scores);
  const std::size_t n = scores.size();
  std::vector<double> grad(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || !(grades[i] > grades[j])) continue;
      const double w = std::abs(delta_ndcg(grades[i], grades[j], ranks[i], ranks[j]));
      const double lambda = theta * logistic(-theta * (scores[i] - scores[j])) * w;
      grad[i] -= lambda;
      grad[j] += lambda;
    }
  }
  return grad;
}

double kendall_tau_exact(std::span<const double> u, std::span<const double> v) {
  require_same_length(u.size(), v.size());
  const std::size_t n = u.size();
  if (n < 2) throw ContractError("Kendall tau needs at least two items");
  long long balance = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      balance += sign(u[i] - u[j]) * sign(v[i] - v[j]);
    }
  }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return static_cast<double>(balance) / pairs;
}

std::vector<double> phi_map(std::span<const double> u) {
  const std::size_t n = u.size();
  if (n < 2) throw ContractError("pair embedding needs at least two items");
  const double scale = 1.0 / std::sqrt(static_cast<double>(n * (n - 1) / 2));
  std::vector<double> out;
  out.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) out.push_back(scale * sign(u[i] - u[j]));
  }
  return out;
}

std::vector<double> phi_smooth(std::span<const double> u, double theta) {
  const std::size_t n = u.size();
  if (n < 2) throw ContractError("pair embedding needs at least two items");
  const double scale = 1.0 / std::sqrt(static_cast<double>(n * (n - 1) / 2));
  std::vector<double> out;
  out.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = theta * (u[i] - u[j]);
      out.push_back(scale * (logistic(d) - logistic(-d)));
    }
  }
  return out;
}

double kendall_kernel(std::span<const double> u, std::span<const double> u_prime,
                      double theta) {
  require_same_length(u.size(), u_prime.size());
  const auto a = phi_map(u);
  const auto b = phi_smooth(u_prime, theta);
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

std::vector<double> kendall_kernel_gradient(std::span<const double> u,
                                            std::span<const double> u_prime,
                                            double theta) {
  require_same_length(u.size(), u_prime.size());
  const std::size_t n = u.size();
  if (n < 2) throw ContractError("pair embedding needs at least two items");
  // Both embeddings carry a 1/sqrt(C) factor.
  const double scale = 1.0 / static_cast<double>(n * (n - 1) / 2);
  std::vector<double> grad(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const int s = sign(u[i] - u[j]);
      if (s == 0) continue;
      const double d = theta * (u_prime[i] - u_prime[j]);
      // d/dx [s(x) - s(-x)] = 2 theta s(x) s(-x)
      const double g = s * scale * 2.0 * theta * logistic(d) * logistic(-d);
      grad[i] += g;
      grad[j] -= g;
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------

void RerankList::validate() const {
  const std::size_t n = base.size();
  if (price.size() != n || margin.size() != n || grades.size() != n ||
      features.size() != n || (!items.empty() && items.size() != n)) {
    throw ContractError("rerank list columns differ in length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(base[i] > 0.0)) throw ContractError("base score must be > 0");
    if (!(price[i] > 0.0)) throw ContractError("price must be > 0");
    if (!(margin[i] > 0.0)) throw ContractError("margin must be > 0");
    if (features[i].size() != features[0].size()) {
      throw ContractError("ragged feature rows");
    }
  }
}

void LrrParams::validate() const {
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
  if (!(theta_rank > 0.0)) throw ConfigError("theta_rank must be > 0");
  if (!(theta_smooth > 0.0)) throw ConfigError("theta_smooth must be > 0");
  if (margin_grades < 2) throw ConfigError("margin_grades must be >= 2");
  if (weights.empty()) throw ConfigError("beta needs at least the ln m weight");
}

double LrrParams::beta(std::span<const double> features, double margin) const {
  if (features.size() + 1 != weights.size()) {
    throw ContractError("beta weights do not match feature width");
  }
  double b = bias + weights.back() * std::log(margin);
  for (std::size_t f = 0; f < features.size(); ++f) b += weights[f] * features[f];
  return b;
}

std::vector<double> composite_score(const RerankList& list, const LrrParams& params) {
  list.validate();
  std::vector<double> out(list.size());
  for (std::size_t i = 0; i < list.size(); ++i) {
    out[i] = std::log(list.base[i]) + params.alpha * std::log(list.price[i]) +
             params.beta(list.features[i], list.margin[i]) *
                 std::log(list.margin[i] / list.price[i]);
  }
  return out;
}

std::vector<double> base_probabilities(std::span<const double> scores, double eps) {
  std::vector<double> out;
  out.reserve(scores.size());
  if (scores.empty()) return out;
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  const double width = *hi - *lo;
  for (const double s : scores) {
    const double t = width > 0.0 ? (s - *lo) / width : 1.0;
    out.push_back(eps + (1.0 - eps) * t);
  }
  return out;
}

MarginGrader::MarginGrader(std::span<const double> margins, int n_grades) {
  if (n_grades < 2) throw ConfigError("margin_grades must be >= 2");
  if (margins.empty()) throw ContractError("no margins to grade");
  std::vector<double> sorted(margins.begin(), margins.end());
  std::sort(sorted.begin(), sorted.end());
  for (int g = 1; g < n_grades; ++g) {
    const auto pos = static_cast<std::size_t>(
        static_cast<double>(g) * static_cast<double>(sorted.size()) / n_grades);
    cuts_.push_back(sorted[std::min(pos, sorted.size() - 1)]);
  }
}

double MarginGrader::grade(double margin) const {
  return static_cast<double>(
      std::upper_bound(cuts_.begin(), cuts_.end(), margin) - cuts_.begin());
}

namespace {

double list_loss(const RerankList& list, const LrrParams& params,
                 std::span<const double> u_prime, std::span<const int> ranks) {
  if (list.size() < 2) return 0.0;
  double loss = lambdarank_loss_frozen(list.grades, u_prime, params.theta_rank, ranks);
  if (params.gamma != 0.0) {
    loss += params.gamma * (1.0 - kendall_kernel(list.base, u_prime, params.theta_smooth));
  }
  return loss;
}

}  // namespace

double lrr_loss(std::span<const RerankList> batch, const LrrParams& params) {
  if (batch.empty()) throw ContractError("empty batch");
  double total = 0.0;
  for (const auto& list : batch) {
    const auto u_prime = composite_score(list, params);
    total += list_loss(list, params, u_prime, ranks_of(u_prime));
  }
  return total;
}

double lrr_loss_frozen(std::span<const RerankList> batch, const LrrParams& params,
                       std::span<const std::vector<int>> ranks) {
  require_same_length(batch.size(), ranks.size());
  double total = 0.0;
  for (std::size_t l = 0; l < batch.size(); ++l) {
    const auto u_prime = composite_score(batch[l], params);
    total += list_loss(batch[l], params, u_prime, ranks[l]);
  }
  return total;
}

LrrGradient lrr_loss_gradient(std::span<const RerankList> batch,
                              const LrrParams& params) {
  LrrGradient g;
  g.weights.assign(params.weights.size(), 0.0);
  for (const auto& list : batch) {
    if (list.size() < 2) continue;
    const auto u_prime = composite_score(list, params);
    auto d_score = lambdarank_gradient(list.grades, u_prime, params.theta_rank);
    if (params.gamma != 0.0) {
      const auto dk = kendall_kernel_gradient(list.base, u_prime, params.theta_smooth);
      for (std::size_t i = 0; i < d_score.size(); ++i) d_score[i] -= params.gamma * dk[i];
    }
    const std::size_t nf = params.weights.size() - 1;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const double c = d_score[i] * std::log(list.margin[i] / list.price[i]);
      for (std::size_t f = 0; f < nf; ++f) g.weights[f] += c * list.features[i][f];
      g.weights[nf] += c * std::log(list.margin[i]);
      g.bias += c;
    }
  }
  return g;
}

double mean_tau(std::span<const RerankList> batch, const LrrParams& params) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& list : batch) {
    if (list.size() < 2) continue;
    total += kendall_tau_exact(list.base, composite_score(list, params));
    ++count;
  }
  return count ? total / static_cast<double>(count) : 1.0;
}

namespace {

double ndcg_by(std::span<const double> scores, std::span<const double> grades,
               std::size_t n) {
  const auto ranks = ranks_of(scores);
  std::vector<double> ordered(grades.size());
  for (std::size_t i = 0; i < grades.size(); ++i) ordered[ranks[i] - 1] = grades[i];
  return ndcg_at_n(ordered, grades, n);
}

}  // namespace

double margin_ndcg(std::span<const RerankList> batch, const LrrParams& params,
                   std::size_t n) {
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (const auto& list : batch) {
    total += ndcg_by(composite_score(list, params), list.grades, n);
  }
  return total / static_cast<double>(batch.size());
}

double base_margin_ndcg(std::span<const RerankList> batch, std::size_t n) {
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (const auto& list : batch) total += ndcg_by(list.base, list.grades, n);
  return total / static_cast<double>(batch.size());
}

LrrTrainResult train_lrr(std::span<const RerankList> batch, const LrrParams& init,
                         const LrrOptimizer& opt) {
  init.validate();
  if (batch.empty()) throw ContractError("empty batch");
  for (const auto& list : batch) {
    if (list.size() < 2) throw ContractError("every training list needs >= 2 items");
    if (list.features.front().size() + 1 != init.weights.size()) {
      throw ContractError("beta weights do not match feature width");
    }
  }
  if (!(opt.step > 0.0)) throw ConfigError("optimizer step must be > 0");
  if (opt.iterations < 0) throw ConfigError("optimizer iterations must be >= 0");

  LrrTrainResult result;
  LrrParams params = init;
  if (opt.init_scale != 0.0) {
    Rng rng(opt.seed);
    for (auto& w : params.weights) w += opt.init_scale * rng.normal();
  }
  auto log_row = [&](int iter, double loss) {
    result.log.push_back({iter, loss, mean_tau(batch, params), margin_ndcg(batch, params)});
  };

  double loss = lrr_loss(batch, params);
  if (!std::isfinite(loss)) throw TrainingError(0, "initial loss is not finite");
  log_row(0, loss);

  double length = opt.step;
  for (int iter = 1; iter <= opt.iterations; ++iter) {
    const auto grad = lrr_loss_gradient(batch, params);
    double norm2 = grad.bias * grad.bias;
    for (const double g : grad.weights) norm2 += g * g;
    if (!std::isfinite(norm2)) throw TrainingError(iter, "gradient is not finite");
    if (norm2 == 0.0) break;

    // Step along the normalized negative gradient. The length halves until
    // the loss does not increase and doubles after each accepted step.
    double step = length / std::sqrt(norm2);
    bool accepted = false;
    LrrParams candidate = params;
    double candidate_loss = loss;
    for (int h = 0; h <= opt.max_halvings; ++h, step *= 0.5) {
      candidate = params;
      for (std::size_t f = 0; f < grad.weights.size(); ++f) {
        candidate.weights[f] -= step * grad.weights[f];
      }
      candidate.bias -= step * grad.bias;
      candidate_loss = lrr_loss(batch, candidate);
      if (std::isfinite(candidate_loss) && candidate_loss <= loss) {
        accepted = true;
        length = 2.0 * step * std::sqrt(norm2);
        break;
      }
    }
    if (!accepted) break;
    const double improvement = loss - candidate_loss;
    params = std::move(candidate);
    loss = candidate_loss;
    log_row(iter, loss);
    if (improvement < opt.tolerance) break;
  }
  result.params = std::move(params);
  return result;
}

RankedList rerank_lrr(const RerankList& list, const LrrParams& params, std::size_t n) {
  const auto u_prime = composite_score(list, params);
  std::vector<std::int32_t> items = list.items;
  if (items.empty()) {
    items.resize(list.size());
    std::iota(items.begin(), items.end(), 0);
  }
  return rank_by_score(items, u_prime, n);
}

std::string lrr_params_json(const LrrParams& params, const LrrOptimizer& opt) {
  nlohmann::ordered_json j;
  j["alpha"] = params.alpha;
  j["weights"] = params.weights;
  j["bias"] = params.bias;
  j["gamma"] = params.gamma;
  j["theta_rank"] = params.theta_rank;
  j["theta_smooth"] = params.theta_smooth;
  j["margin_grades"] = params.margin_grades;
  j["optimizer"] = {{"step", opt.step},
                    {"iterations", opt.iterations},
                    {"seed", opt.seed},
                    {"init_scale", opt.init_scale},
                    {"tolerance", opt.tolerance}};
  return j.dump(2) + "\n";
}

LrrParams lrr_params_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    LrrParams p;
    p.alpha = j.at("alpha").get<double>();
    p.weights = j.at("weights").get<std::vector<double>>();
    p.bias = j.at("bias").get<double>();
    p.gamma = j.at("gamma").get<double>();
    p.theta_rank = j.at("theta_rank").get<double>();
    p.theta_smooth = j.at("theta_smooth").get<double>();
    p.margin_grades = j.at("margin_grades").get<int>();
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad LRR parameter file: ") + e.what());
  }
}

std::string lrr_log_csv(std::span<const LrrLogRow> log) {
  std::ostringstream out;
  out << "iter,loss,mean_tau,margin_ndcg\n";
  for (const auto& r : log) {
    out << r.iteration << ',' << io::format_double(r.loss) << ','
        << io::format_double(r.mean_tau) << ',' << io::format_double(r.margin_ndcg)
        << '\n';
  }
  return out.str();
}

}  // namespace msrec
