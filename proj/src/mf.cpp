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
#include "msrec/mf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "msrec/errors.hpp"
#include "msrec/io.hpp"
#include "msrec/random.hpp"

namespace msrec {

void TrainConfig::validate() const {
  if (d < 1) throw ConfigError("latent dimension d must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(l2_reg >= 0.0)) throw ConfigError("l2_reg must be >= 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
}

FactorModel::FactorModel(std::size_t n_users, std::size_t n_items, int d,
                         RatingScale scale, double global_mean)
    : d_(d),
      scale_(scale),
      global_mean_(global_mean),
      user_factors_(n_users * static_cast<std::size_t>(d), 0.0),
      item_factors_(n_items * static_cast<std::size_t>(d), 0.0),
      user_bias_(n_users, 0.0),
      item_bias_(n_items, 0.0) {
  if (d < 1) throw ConfigError("latent dimension d must be >= 1");
}

std::span<double> FactorModel::user_factors(std::int32_t u) {
  return {user_factors_.data() + static_cast<std::size_t>(u) * d_,
          static_cast<std::size_t>(d_)};
}
std::span<const double> FactorModel::user_factors(std::int32_t u) const {
  return {user_factors_.data() + static_cast<std::size_t>(u) * d_,
          static_cast<std::size_t>(d_)};
}
std::span<double> FactorModel::item_factors(std::int32_t i) {
  return {item_factors_.data() + static_cast<std::size_t>(i) * d_,
          static_cast<std::size_t>(d_)};
}
std::span<const double> FactorModel::item_factors(std::int32_t i) const {
  return {item_factors_.data() + static_cast<std::size_t>(i) * d_,
          static_cast<std::size_t>(d_)};
}

void FactorModel::check(std::int32_t u, std::int32_t i) const {
  if (u < 0 || static_cast<std::size_t>(u) >= n_users()) {
    throw LookupError("user index " + std::to_string(u) + " out of range");
  }
  if (i < 0 || static_cast<std::size_t>(i) >= n_items()) {
    throw LookupError("item index " + std::to_string(i) + " out of range");
  }
}

double FactorModel::score(std::int32_t u, std::int32_t i) const {
  check(u, i);
  const auto p = user_factors(u);
  const auto q = item_factors(i);
  double dot = 0.0;
  for (int f = 0; f < d_; ++f) dot += p[f] * q[f];
  return global_mean_ + user_bias_[u] + item_bias_[i] + dot;
}

double FactorModel::predict_rating(std::int32_t u, std::int32_t i) const {
  return scale_.clamp(score(u, i));
}

bool FactorModel::all_finite() const {
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return std::isfinite(global_mean_) && finite(user_factors_) &&
         finite(item_factors_) && finite(user_bias_) && finite(item_bias_);
}

double rmse(const FactorModel& model, const RatingsDataset& ds) {
  if (ds.empty()) return 0.0;
  double sse = 0.0;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const double e = ds.records()[k].rating - model.score(ds.user_of(k), ds.item_of(k));
    sse += e * e;
  }
  return std::sqrt(sse / static_cast<double>(ds.size()));
}

FactorModel train_mf(const RatingsDataset& train, const TrainConfig& cfg,
                     TrainReport* report) {
  return train_mf_with_offsets(train, cfg, nullptr, report);
}

FactorModel train_mf_with_offsets(const RatingsDataset& train,
                                  const TrainConfig& cfg,
                                  const EpochOffsets& offsets,
                                  TrainReport* report) {
  cfg.validate();
  if (train.empty()) throw EmptyDatasetError("training set is empty");

  FactorModel model(train.n_users(), train.n_items(), cfg.d, train.scale(),
                    train.mean_rating());
  model.config = cfg;

  std::vector<bool> user_seen(train.n_users(), false);
  std::vector<bool> item_seen(train.n_items(), false);
  for (std::size_t k = 0; k < train.size(); ++k) {
    user_seen[train.user_of(k)] = true;
    item_seen[train.item_of(k)] = true;
  }

  // Factors ~ N(0, 0.1^2 / sqrt(d)). Entities without training ratings keep
  // zero factors so their scores reduce to the bias terms.
  Rng rng(cfg.seed);
  const double init_sd = 0.1 / std::pow(static_cast<double>(cfg.d), 0.25);
  for (std::size_t u = 0; u < train.n_users(); ++u) {
    for (auto& x : model.user_factors(static_cast<std::int32_t>(u))) {
      const double draw = init_sd * rng.normal();
      x = user_seen[u] ? draw : 0.0;
    }
  }
  for (std::size_t i = 0; i < train.n_items(); ++i) {
    for (auto& x : model.item_factors(static_cast<std::int32_t>(i))) {
      const double draw = init_sd * rng.normal();
      x = item_seen[i] ? draw : 0.0;
    }
  }

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const double lr = cfg.learning_rate;
  const double l2 = cfg.l2_reg;
  const int d = cfg.d;
  std::vector<double> p_old(d);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<double> extra;
    if (offsets) {
      extra = offsets(model, epoch);
      if (!extra.empty() && extra.size() != train.size()) {
        throw ContractError("epoch offsets must cover every training record");
      }
    }
    rng.shuffle(std::span<std::size_t>(order));
    for (const auto k : order) {
      const auto u = train.user_of(k);
      const auto i = train.item_of(k);
      double e = train.records()[k].rating - model.score(u, i);
      if (!extra.empty()) e += extra[k];

      auto p = model.user_factors(u);
      auto q = model.item_factors(i);
      double& bu = model.user_bias(u);
      double& bi = model.item_bias(i);
      bu += lr * (e - l2 * bu);
      bi += lr * (e - l2 * bi);
      std::copy(p.begin(), p.end(), p_old.begin());
      for (int f = 0; f < d; ++f) {
        p[f] += lr * (e * q[f] - l2 * p[f]);
        q[f] += lr * (e * p_old[f] - l2 * q[f]);
      }
    }
    if (!model.all_finite()) {
      throw TrainingError(epoch, "parameters diverged (non-finite value)");
    }
    if (report) report->epoch_rmse.push_back(rmse(model, train));
  }
  return model;
}

double rating_objective(const FactorModel& model, std::int32_t u,
                        std::int32_t i, double rating, double l2) {
  const double e = rating - model.score(u, i);
  double reg = model.user_bias(u) * model.user_bias(u) +
               model.item_bias(i) * model.item_bias(i);
  for (const double x : model.user_factors(u)) reg += x * x;
  for (const double x : model.item_factors(i)) reg += x * x;
  return 0.5 * e * e + 0.5 * l2 * reg;
}

RatingGradient rating_gradient(const FactorModel& model, std::int32_t u,
                               std::int32_t i, double rating, double l2) {
  const double e = rating - model.score(u, i);
  const auto p = model.user_factors(u);
  const auto q = model.item_factors(i);
  RatingGradient g;
  g.user_factors.resize(p.size());
  g.item_factors.resize(q.size());
  for (std::size_t f = 0; f < p.size(); ++f) {
    g.user_factors[f] = -e * q[f] + l2 * p[f];
    g.item_factors[f] = -e * p[f] + l2 * q[f];
  }
  g.user_bias = -e + l2 * model.user_bias(u);
  g.item_bias = -e + l2 * model.item_bias(i);
  return g;
}

RankedList rank_by_score(std::span<const std::int32_t> items,
                         std::span<const double> scores, std::size_t n) {
  if (items.size() != scores.size()) {
    throw ContractError("items and scores differ in length");
  }
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t keep = std::min(n, items.size());
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return items[a] < items[b];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep),
                    order.end(), better);
  RankedList out;
  out.truncated = n > items.size();
  out.items.reserve(keep);
  out.scores.reserve(keep);
  for (std::size_t j = 0; j < keep; ++j) {
    out.items.push_back(items[order[j]]);
    out.scores.push_back(scores[order[j]]);
  }
  return out;
}

RankedList top_n(const FactorModel& model, std::int32_t user,
                 std::span<const std::int32_t> candidates, std::size_t n) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const auto i : candidates) scores.push_back(model.score(user, i));
  return rank_by_score(candidates, scores, n);
}

// ---------------------------------------------------------------------------
// Persistence: a small text format, one block per parameter group.
//
//   msrec-factor-model 1
//   d <d> n_users <n> n_items <n>
//   config <seed> <learning_rate> <l2_reg> <epochs>
//   scale <min> <max>
//   global_mean <x>
//   user_bias / item_bias / user_factors / item_factors blocks, one row each

namespace {

constexpr std::string_view kMagic = "msrec-factor-model";

void write_rows(std::ostringstream& out, std::string_view name,
                std::span<const double> values, std::size_t width) {
  out << name << '\n';
  for (std::size_t r = 0; r * width < values.size(); ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      if (c) out << ',';
      out << io::format_double(values[r * width + c]);
    }
    out << '\n';
  }
}

}  // namespace

std::string model_text(const FactorModel& model) {
  std::ostringstream out;
  out << kMagic << " 1\n";
  out << "d " << model.d() << " n_users " << model.n_users() << " n_items "
      << model.n_items() << '\n';
  out << "config " << model.config.seed << ' '
      << io::format_double(model.config.learning_rate) << ' '
      << io::format_double(model.config.l2_reg) << ' ' << model.config.epochs
      << '\n';
  out << "scale " << io::format_double(model.scale().min) << ' '
      << io::format_double(model.scale().max) << '\n';
  out << "global_mean " << io::format_double(model.global_mean()) << '\n';
  std::vector<double> ub(model.n_users()), ib(model.n_items());
  for (std::size_t u = 0; u < ub.size(); ++u) ub[u] = model.user_bias(static_cast<std::int32_t>(u));
  for (std::size_t i = 0; i < ib.size(); ++i) ib[i] = model.item_bias(static_cast<std::int32_t>(i));
  write_rows(out, "user_bias", ub, 1);
  write_rows(out, "item_bias", ib, 1);
  write_rows(out, "user_factors", model.user_factor_block(), model.d());
  write_rows(out, "item_factors", model.item_factor_block(), model.d());
  return out.str();
}

void save_model(const std::filesystem::path& path, const FactorModel& model) {
  io::write_file_atomic(path, model_text(model));
}

FactorModel load_model(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  const auto lines = io::split(text, '\n');
  std::size_t ln = 0;
  auto next = [&]() -> std::string_view {
    if (ln >= lines.size()) throw ParseError(ln, "unexpected end of model file");
    return io::trim(lines[ln++]);
  };
  auto words = [](std::string_view line) { return io::split(line, ' '); };
  try {
    auto head = words(next());
    if (head.size() != 2 || head[0] != kMagic || head[1] != "1") {
      throw ParseError(1, "not a msrec factor model (version 1)");
    }
    auto dims = words(next());
    if (dims.size() != 6) throw ParseError(ln, "bad dimension line");
    const int d = static_cast<int>(io::parse_int(dims[1]));
    const auto n_users = static_cast<std::size_t>(io::parse_int(dims[3]));
    const auto n_items = static_cast<std::size_t>(io::parse_int(dims[5]));
    auto cfgw = words(next());
    if (cfgw.size() != 5) throw ParseError(ln, "bad config line");
    TrainConfig cfg;
    cfg.d = d;
    cfg.seed = static_cast<std::uint64_t>(io::parse_int(cfgw[1]));
    cfg.learning_rate = io::parse_double(cfgw[2]);
    cfg.l2_reg = io::parse_double(cfgw[3]);
    cfg.epochs = static_cast<int>(io::parse_int(cfgw[4]));
    auto sc = words(next());
    if (sc.size() != 3) throw ParseError(ln, "bad scale line");
    const RatingScale scale{io::parse_double(sc[1]), io::parse_double(sc[2])};
    auto gm = words(next());
    if (gm.size() != 2) throw ParseError(ln, "bad global_mean line");

    FactorModel model(n_users, n_items, d, scale, io::parse_double(gm[1]));
    model.config = cfg;
    auto read_block = [&](std::string_view name, std::size_t rows,
                          std::size_t width, auto&& sink) {
      if (next() != name) throw ParseError(ln, "expected block " + std::string(name));
      for (std::size_t r = 0; r < rows; ++r) {
        const auto cells = io::split(next(), ',');
        if (cells.size() != width) throw ParseError(ln, "bad row width");
        for (std::size_t c = 0; c < width; ++c) sink(r, c, io::parse_double(cells[c]));
      }
    };
    read_block("user_bias", n_users, 1, [&](std::size_t r, std::size_t, double x) {
      model.user_bias(static_cast<std::int32_t>(r)) = x;
    });
    read_block("item_bias", n_items, 1, [&](std::size_t r, std::size_t, double x) {
      model.item_bias(static_cast<std::int32_t>(r)) = x;
    });
    read_block("user_factors", n_users, static_cast<std::size_t>(d),
               [&](std::size_t r, std::size_t c, double x) {
                 model.user_factors(static_cast<std::int32_t>(r))[c] = x;
               });
    read_block("item_factors", n_items, static_cast<std::size_t>(d),
               [&](std::size_t r, std::size_t c, double x) {
                 model.item_factors(static_cast<std::int32_t>(r))[c] = x;
               });
    return model;
  } catch (const ConfigError& e) {
    throw ParseError(ln, e.what());
  }
}

}  // namespace msrec
