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
#include "msrec/fairness.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include "msrec/errors.hpp"

namespace msrec {

IndependenceTerm parse_independence_term(std::string_view name) {
  if (name == "mean_matching") return IndependenceTerm::kMeanMatching;
  if (name == "bhattacharyya") return IndependenceTerm::kBhattacharyya;
  if (name == "mutual_information") return IndependenceTerm::kMutualInformation;
  throw ConfigError("unknown independence term '" + std::string(name) +
                    "' (mean_matching|bhattacharyya|mutual_information)");
}

std::string to_string(IndependenceTerm term) {
  switch (term) {
    case IndependenceTerm::kMeanMatching: return "mean_matching";
    case IndependenceTerm::kBhattacharyya: return "bhattacharyya";
    case IndependenceTerm::kMutualInformation: return "mutual_information";
  }
  return "?";
}

void FairnessConfig::validate() const {
  if (!(eta >= 0.0)) throw ConfigError("eta must be >= 0");
  if (lambda && !(*lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
}

namespace {

struct Fit {
  double n = 0.0;
  double mean = 0.0;
  double var = 0.0;     // population variance, floored
  bool floored = false;
};

Fit fit(std::span<const double> xs) {
  Fit f;
  f.n = static_cast<double>(xs.size());
  for (const double x : xs) f.mean += x;
  f.mean /= f.n;
  for (const double x : xs) f.var += (x - f.mean) * (x - f.mean);
  f.var /= f.n;
  if (f.var < kVarianceFloor) {
    f.var = kVarianceFloor;
    f.floored = true;
  }
  return f;
}

void require_groups(const GroupedPredictions& g, std::size_t min_size) {
  if (g.group0.size() < min_size || g.group1.size() < min_size) {
    throw ContractError("each sensitive group needs at least " +
                        std::to_string(min_size) + " prediction(s)");
  }
}

// d mean / d x_k = 1/n ; d var / d x_k = 2 (x_k - mean) / n (zero if floored)
void accumulate(std::span<const double> xs, const Fit& f, double d_mean,
                double d_var, std::vector<double>& out) {
  out.resize(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    double g = d_mean / f.n;
    if (!f.floored) g += d_var * 2.0 * (xs[k] - f.mean) / f.n;
    out[k] += g;
  }
}

}  // namespace

double indep_mean_matching(const GroupedPredictions& g) {
  require_groups(g, 1);
  const Fit a = fit(g.group0), b = fit(g.group1);
  return -(a.mean - b.mean) * (a.mean - b.mean);
}

double indep_bhattacharyya(const GroupedPredictions& g) {
  require_groups(g, 2);
  const Fit a = fit(g.group0), b = fit(g.group1);
  const double s = a.var + b.var;
  const double distance = (a.mean - b.mean) * (a.mean - b.mean) / (4.0 * s) +
                          0.5 * std::log(s / (2.0 * std::sqrt(a.var * b.var)));
  return -distance;
}

double indep_mutual_info(const GroupedPredictions& g) {
  require_groups(g, 2);
  const Fit a = fit(g.group0), b = fit(g.group1);
  std::vector<double> pooled(g.group0);
  pooled.insert(pooled.end(), g.group1.begin(), g.group1.end());
  const Fit all = fit(pooled);
  const double pa = a.n / all.n, pb = b.n / all.n;
  // The 1/2 ln(2 pi e) constants cancel.
  const double mi = 0.5 * std::log(all.var) -
                    (pa * 0.5 * std::log(a.var) + pb * 0.5 * std::log(b.var));
  return -mi;
}

double independence(IndependenceTerm term, const GroupedPredictions& g) {
  switch (term) {
    case IndependenceTerm::kMeanMatching: return indep_mean_matching(g);
    case IndependenceTerm::kBhattacharyya: return indep_bhattacharyya(g);
    case IndependenceTerm::kMutualInformation: return indep_mutual_info(g);
  }
  return 0.0;
}

GroupedPredictions independence_gradient(IndependenceTerm term,
                                         const GroupedPredictions& g) {
  GroupedPredictions out;
  out.group0.assign(g.group0.size(), 0.0);
  out.group1.assign(g.group1.size(), 0.0);
  switch (term) {
    case IndependenceTerm::kMeanMatching: {
      require_groups(g, 1);
      const Fit a = fit(g.group0), b = fit(g.group1);
      const double diff = a.mean - b.mean;
      accumulate(g.group0, a, -2.0 * diff, 0.0, out.group0);
      accumulate(g.group1, b, 2.0 * diff, 0.0, out.group1);
      break;
    }
    case IndependenceTerm::kBhattacharyya: {
      require_groups(g, 2);
      const Fit a = fit(g.group0), b = fit(g.group1);
      const double diff = a.mean - b.mean;
      const double s = a.var + b.var;
      // D = diff^2 / (4 s) + 1/2 ln s - 1/4 ln va - 1/4 ln vb - 1/2 ln 2
      const double dd_dmean0 = diff / (2.0 * s);
      const double dd_ds = -diff * diff / (4.0 * s * s) + 0.5 / s;
      const double dd_dva = dd_ds - 0.25 / a.var;
      const double dd_dvb = dd_ds - 0.25 / b.var;
      accumulate(g.group0, a, -dd_dmean0, -dd_dva, out.group0);
      accumulate(g.group1, b, dd_dmean0, -dd_dvb, out.group1);
      break;
    }
    case IndependenceTerm::kMutualInformation: {
      require_groups(g, 2);
      const Fit a = fit(g.group0), b = fit(g.group1);
      std::vector<double> pooled(g.group0);
      pooled.insert(pooled.end(), g.group1.begin(), g.group1.end());
      const Fit all = fit(pooled);
      const double pa = a.n / all.n, pb = b.n / all.n;
      // term = -1/2 ln v + pa/2 ln va + pb/2 ln vb
      accumulate(g.group0, a, 0.0, pa * 0.5 / a.var, out.group0);
      accumulate(g.group1, b, 0.0, pb * 0.5 / b.var, out.group1);
      if (!all.floored) {
        const double d_pool = -0.5 / all.var;
        for (std::size_t k = 0; k < g.group0.size(); ++k) {
          out.group0[k] += d_pool * 2.0 * (g.group0[k] - all.mean) / all.n;
        }
        for (std::size_t k = 0; k < g.group1.size(); ++k) {
          out.group1[k] += d_pool * 2.0 * (g.group1[k] - all.mean) / all.n;
        }
      }
      break;
    }
  }
  return out;
}

GroupedPredictions group_predictions(const FactorModel& model,
                                     const RatingsDataset& ds,
                                     std::span<const bool> item_sensitive,
                                     bool clamp) {
  GroupedPredictions g;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const auto i = ds.item_of(k);
    const double s = clamp ? model.predict_rating(ds.user_of(k), i)
                           : model.score(ds.user_of(k), i);
    (item_sensitive[static_cast<std::size_t>(i)] ? g.group1 : g.group0).push_back(s);
  }
  return g;
}

FactorModel train_fair_mf(const RatingsDataset& train,
                          std::span<const bool> item_sensitive,
                          const TrainConfig& cfg, const FairnessConfig& fair,
                          TrainReport* report) {
  fair.validate();
  if (item_sensitive.size() != train.n_items()) {
    throw ContractError("one sensitive label per item required");
  }
  std::size_t n1 = 0;
  for (std::size_t k = 0; k < train.size(); ++k) {
    n1 += item_sensitive[static_cast<std::size_t>(train.item_of(k))] ? 1 : 0;
  }
  const std::size_t min_size = fair.term == IndependenceTerm::kMeanMatching ? 1 : 2;
  if (n1 < min_size || train.size() - n1 < min_size) {
    throw ContractError("both sensitive groups must appear in the training data");
  }

  TrainConfig base = cfg;
  if (fair.lambda) base.l2_reg = *fair.lambda;
  if (fair.eta == 0.0) return train_mf(train, base, report);

  auto offsets = [&](const FactorModel& model, int) {
    const auto groups = group_predictions(model, train, item_sensitive);
    const auto grad = independence_gradient(fair.term, groups);
    // Residual offset eta * d indep / d r_hat, in record order.
    std::vector<double> extra(train.size());
    std::size_t j0 = 0, j1 = 0;
    for (std::size_t k = 0; k < train.size(); ++k) {
      const bool s = item_sensitive[static_cast<std::size_t>(train.item_of(k))];
      extra[k] = fair.eta * (s ? grad.group1[j1++] : grad.group0[j0++]);
    }
    return extra;
  };
  return train_mf_with_offsets(train, base, offsets, report);
}

AbsoluteUnfairness absolute_unfairness(std::span<const TestRating> test,
                                       std::span<const bool> item_sensitive) {
  struct Acc {
    double pred[2] = {0.0, 0.0};
    double obs[2] = {0.0, 0.0};
    std::size_t n[2] = {0, 0};
  };
  std::map<std::int32_t, Acc> per_user;
  for (const auto& t : test) {
    if (t.item < 0 || static_cast<std::size_t>(t.item) >= item_sensitive.size()) {
      throw ContractError("test item without sensitive label");
    }
    const int s = item_sensitive[static_cast<std::size_t>(t.item)] ? 1 : 0;
    auto& acc = per_user[t.user];
    acc.pred[s] += t.predicted;
    acc.obs[s] += t.rating;
    ++acc.n[s];
  }
  AbsoluteUnfairness out;
  double total = 0.0;
  for (const auto& [user, acc] : per_user) {
    if (acc.n[0] == 0 || acc.n[1] == 0) {
      ++out.skipped;
      continue;
    }
    const double n0 = static_cast<double>(acc.n[0]);
    const double n1 = static_cast<double>(acc.n[1]);
    const double pred_gap = std::abs(acc.pred[0] / n0 - acc.pred[1] / n1);
    const double obs_gap = std::abs(acc.obs[0] / n0 - acc.obs[1] / n1);
    total += std::abs(pred_gap - obs_gap);
    ++out.users;
  }
  if (out.users == 0) {
    throw UndefinedMetricError("no user has test items in both sensitive groups");
  }
  out.value = total / static_cast<double>(out.users);
  return out;
}

}  // namespace msrec
