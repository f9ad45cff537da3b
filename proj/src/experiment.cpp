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

#include "msrec/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "msrec/errors.hpp"
#include "msrec/io.hpp"
#include "msrec/metrics.hpp"
#include "msrec/parallel.hpp"

namespace msrec {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::vector<double> parse_double_list(std::string_view text) {
  std::vector<double> out;
  for (auto f : io::split(text, ',')) {
    f = io::trim(f);
    if (f.empty()) throw ConfigError("empty list entry");
    out.push_back(io::parse_double(f));
  }
  return out;
}

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("expected true or false, got '" + std::string(v) + "'");
}

int parse_int32(std::string_view v) {
  const long long x = io::parse_int(v);
  if (x < -2147483647LL || x > 2147483647LL) throw ConfigError("integer out of range");
  return static_cast<int>(x);
}

std::string join_doubles(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += io::format_double(xs[i]);
  }
  return out;
}

std::string to_string(RerankerKind k) {
  switch (k) {
    case RerankerKind::kNone: return "none";
    case RerankerKind::kGreedy: return "greedy";
    case RerankerKind::kLrr: return "lrr";
    case RerankerKind::kFair: return "fair";
  }
  return "none";
}

RerankerKind parse_reranker(std::string_view v) {
  if (v == "none") return RerankerKind::kNone;
  if (v == "greedy") return RerankerKind::kGreedy;
  if (v == "lrr") return RerankerKind::kLrr;
  if (v == "fair") return RerankerKind::kFair;
  throw ConfigError("unknown reranker '" + std::string(v) + "' (none|greedy|lrr|fair)");
}

struct ScenarioText {
  std::string consumer = "passive";
  std::string provider = "neutral_passive";
  std::string system = "neutral";
};

// Raw parse state: the config plus the bits that need cross-field checks.
struct ParseState {
  ExperimentConfig cfg;
  ScenarioText scenario;
  bool has_seed = false;
  bool has_path = false;
  bool has_cutoff = false;
  std::string provider_dist = "uniform";
  double power_exponent = 1.5;
  std::string purchase = "guaranteed";
  double decay_alpha = -1.5;
  double base_prob = 0.1;
  fs::path base_dir;
};

fs::path resolve(const fs::path& base, std::string_view v) {
  fs::path p{std::string(v)};
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

using Setter = std::function<void(ParseState&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"seed", [](ParseState& s, std::string_view v) {
         const long long x = io::parse_int(v);
         if (x < 0) throw ConfigError("must be >= 0");
         s.cfg.seed = static_cast<std::uint64_t>(x);
         s.has_seed = true;
       }},
      {"dataset.path", [](ParseState& s, std::string_view v) {
         s.cfg.dataset.path = resolve(s.base_dir, v);
         s.has_path = true;
       }},
      {"dataset.format", [](ParseState& s, std::string_view v) {
         s.cfg.dataset.format = parse_rating_format(v);
       }},
      {"dataset.items", [](ParseState& s, std::string_view v) {
         s.cfg.dataset.items = resolve(s.base_dir, v);
       }},
      {"dataset.rating_min", [](ParseState& s, std::string_view v) {
         s.cfg.dataset.scale.min = io::parse_double(v);
       }},
      {"dataset.rating_max", [](ParseState& s, std::string_view v) {
         s.cfg.dataset.scale.max = io::parse_double(v);
       }},
      {"split.kind", [](ParseState& s, std::string_view v) {
         if (v == "kfold") s.cfg.split.kind = SplitSpec::Kind::kKFold;
         else if (v == "temporal") s.cfg.split.kind = SplitSpec::Kind::kTemporal;
         else throw ConfigError("unknown split '" + std::string(v) + "' (kfold|temporal)");
       }},
      {"split.k", [](ParseState& s, std::string_view v) { s.cfg.split.k = parse_int32(v); }},
      {"split.max_folds", [](ParseState& s, std::string_view v) {
         s.cfg.split.max_folds = parse_int32(v);
       }},
      {"split.cutoff", [](ParseState& s, std::string_view v) {
         s.cfg.split.cutoff = io::parse_int(v);
         s.has_cutoff = true;
       }},
      {"simulate.providers", [](ParseState& s, std::string_view v) {
         s.cfg.simulate.providers = parse_int32(v);
       }},
      {"simulate.provider_dist", [](ParseState& s, std::string_view v) {
         if (v != "uniform" && v != "power_law") {
           throw ConfigError("unknown distribution '" + std::string(v) + "' (uniform|power_law)");
         }
         s.provider_dist = std::string(v);
       }},
      {"simulate.power_exponent", [](ParseState& s, std::string_view v) {
         s.power_exponent = io::parse_double(v);
       }},
      {"simulate.margin_mu", [](ParseState& s, std::string_view v) {
         s.cfg.simulate.profit.mu = io::parse_double(v);
       }},
      {"simulate.margin_sigma", [](ParseState& s, std::string_view v) {
         s.cfg.simulate.profit.sigma = io::parse_double(v);
       }},
      {"simulate.margin_lo", [](ParseState& s, std::string_view v) {
         s.cfg.simulate.profit.lo = io::parse_double(v);
       }},
      {"simulate.margin_hi", [](ParseState& s, std::string_view v) {
         s.cfg.simulate.profit.hi = io::parse_double(v);
       }},
      {"simulate.commission", [](ParseState& s, std::string_view v) {
         s.cfg.simulate.profit.commission = io::parse_double(v);
       }},
      {"simulate.sensitive_rule", [](ParseState& s, std::string_view v) {
         s.cfg.simulate.sensitive = SensitiveRule::parse(v);
       }},
      {"model.d", [](ParseState& s, std::string_view v) { s.cfg.model.d = parse_int32(v); }},
      {"model.learning_rate", [](ParseState& s, std::string_view v) {
         s.cfg.model.learning_rate = io::parse_double(v);
       }},
      {"model.l2", [](ParseState& s, std::string_view v) {
         s.cfg.model.l2_reg = io::parse_double(v);
       }},
      {"model.epochs", [](ParseState& s, std::string_view v) {
         s.cfg.model.epochs = parse_int32(v);
       }},
      {"rerank.kind", [](ParseState& s, std::string_view v) {
         s.cfg.rerank.kind = parse_reranker(v);
       }},
      {"rerank.threshold", [](ParseState& s, std::string_view v) {
         s.cfg.rerank.threshold = io::parse_double(v);
       }},
      {"rerank.thresholds", [](ParseState& s, std::string_view v) {
         s.cfg.rerank.thresholds = parse_double_list(v);
       }},
      {"rerank.purchase", [](ParseState& s, std::string_view v) {
         if (v != "guaranteed" && v != "decay") {
           throw ConfigError("unknown purchase model '" + std::string(v) + "' (guaranteed|decay)");
         }
         s.purchase = std::string(v);
       }},
      {"rerank.decay_alpha", [](ParseState& s, std::string_view v) {
         s.decay_alpha = io::parse_double(v);
       }},
      {"rerank.base_prob", [](ParseState& s, std::string_view v) {
         s.base_prob = io::parse_double(v);
       }},
      {"rerank.list_size", [](ParseState& s, std::string_view v) {
         const long long x = io::parse_int(v);
         if (x < 1) throw ConfigError("must be >= 1");
         s.cfg.rerank.list_size = static_cast<std::size_t>(x);
       }},
      {"rerank.candidates", [](ParseState& s, std::string_view v) {
         if (v == "all_unrated") s.cfg.rerank.candidates = CandidatePolicy::kAllUnrated;
         else if (v == "test_items") s.cfg.rerank.candidates = CandidatePolicy::kTestItems;
         else throw ConfigError("unknown policy '" + std::string(v) + "' (all_unrated|test_items)");
       }},
      {"lrr.alpha", [](ParseState& s, std::string_view v) {
         s.cfg.lrr.init.alpha = io::parse_double(v);
       }},
      {"lrr.gamma", [](ParseState& s, std::string_view v) {
         s.cfg.lrr.init.gamma = io::parse_double(v);
       }},
      {"lrr.theta_rank", [](ParseState& s, std::string_view v) {
         s.cfg.lrr.init.theta_rank = io::parse_double(v);
       }},
      {"lrr.theta_smooth", [](ParseState& s, std::string_view v) {
         s.cfg.lrr.init.theta_smooth = io::parse_double(v);
       }},
      {"lrr.grades", [](ParseState& s, std::string_view v) {
         s.cfg.lrr.init.margin_grades = parse_int32(v);
       }},
      {"lrr.step", [](ParseState& s, std::string_view v) {
         s.cfg.lrr.optimizer.step = io::parse_double(v);
       }},
      {"lrr.iters", [](ParseState& s, std::string_view v) {
         s.cfg.lrr.optimizer.iterations = parse_int32(v);
       }},
      {"lrr.candidates", [](ParseState& s, std::string_view v) {
         const long long x = io::parse_int(v);
         if (x < 2) throw ConfigError("must be >= 2");
         s.cfg.lrr.candidates = static_cast<std::size_t>(x);
       }},
      {"lrr.max_lists", [](ParseState& s, std::string_view v) {
         const long long x = io::parse_int(v);
         if (x < 0) throw ConfigError("must be >= 0");
         s.cfg.lrr.max_lists = static_cast<std::size_t>(x);
       }},
      {"fair.etas", [](ParseState& s, std::string_view v) {
         s.cfg.fair.etas = parse_double_list(v);
       }},
      {"fair.term", [](ParseState& s, std::string_view v) {
         s.cfg.fair.term = parse_independence_term(v);
       }},
      {"fair.lambda", [](ParseState& s, std::string_view v) {
         s.cfg.fair.lambda = io::parse_double(v);
       }},
      {"metrics.relevance_threshold", [](ParseState& s, std::string_view v) {
         s.cfg.metrics.relevance_threshold = io::parse_double(v);
       }},
      {"metrics.discounted_exposure", [](ParseState& s, std::string_view v) {
         s.cfg.metrics.discounted_exposure = parse_bool(v);
       }},
      {"scenario.consumer", [](ParseState& s, std::string_view v) {
         s.scenario.consumer = std::string(v);
       }},
      {"scenario.provider", [](ParseState& s, std::string_view v) {
         s.scenario.provider = std::string(v);
       }},
      {"scenario.system", [](ParseState& s, std::string_view v) {
         s.scenario.system = std::string(v);
       }},
      {"run.threads", [](ParseState& s, std::string_view v) {
         s.cfg.threads = parse_int32(v);
       }},
      {"output.dir", [](ParseState& s, std::string_view v) {
         s.cfg.out_dir = resolve(s.base_dir, v);
       }},
  };
  return table;
}

void check(std::vector<std::string>& errors, bool ok, const std::string& msg) {
  if (!ok) errors.push_back(msg);
}

void cross_validate(ParseState& s, std::vector<std::string>& errors) {
  auto& c = s.cfg;
  check(errors, s.has_seed, "seed: required field is missing");
  if (!s.has_path) {
    errors.push_back("dataset.path: required field is missing");
  } else {
    check(errors, fs::is_regular_file(c.dataset.path),
          "dataset.path: file not found: " + c.dataset.path.string());
  }
  if (c.dataset.items) {
    check(errors, fs::is_regular_file(*c.dataset.items),
          "dataset.items: file not found: " + c.dataset.items->string());
  }
  const auto& scale = c.dataset.scale;
  check(errors, std::isfinite(scale.min) && std::isfinite(scale.max) && scale.min < scale.max,
        "dataset.rating_min: must be below dataset.rating_max");

  if (c.split.kind == SplitSpec::Kind::kKFold) {
    check(errors, c.split.k >= 2, "split.k: must be >= 2");
  } else {
    check(errors, s.has_cutoff, "split.cutoff: required for a temporal split");
  }
  check(errors, c.split.max_folds >= 0, "split.max_folds: must be >= 0");

  check(errors, c.simulate.providers >= 1, "simulate.providers: must be >= 1");
  if (s.provider_dist == "power_law") {
    check(errors, std::isfinite(s.power_exponent) && s.power_exponent > 0.0,
          "simulate.power_exponent: must be > 0");
    c.simulate.distribution = PowerLawProviders{s.power_exponent};
  } else {
    c.simulate.distribution = UniformProviders{};
  }
  const auto& pf = c.simulate.profit;
  check(errors, pf.sigma > 0.0, "simulate.margin_sigma: must be > 0");
  check(errors, pf.lo >= 0.0, "simulate.margin_lo: must be >= 0");
  check(errors, pf.lo < pf.hi, "simulate.margin_lo: must be below simulate.margin_hi");
  check(errors, pf.commission > 0.0 && pf.commission <= 1.0,
        "simulate.commission: must lie in (0, 1]");
  if (c.simulate.sensitive) {
    check(errors, c.dataset.items.has_value(),
          "simulate.sensitive_rule: needs dataset.items for item attributes");
  }

  try {
    c.model.validate();
  } catch (const Error& e) {
    errors.push_back(std::string("model: ") + e.what());
  }

  if (s.purchase == "decay") {
    c.rerank.purchase = PurchaseModel::decay(s.decay_alpha, s.base_prob, scale.max);
  } else {
    c.rerank.purchase = PurchaseModel::guaranteed();
    c.rerank.purchase.top_rating = scale.max;
  }
  try {
    c.rerank.purchase.validate();
  } catch (const Error& e) {
    errors.push_back(std::string("rerank.purchase: ") + e.what());
  }
  auto in_scale = [&](double t) { return t >= scale.min && t <= scale.max; };
  check(errors, in_scale(c.rerank.threshold),
        "rerank.threshold: " + io::format_double(c.rerank.threshold) +
            " outside the rating scale [" + io::format_double(scale.min) + ", " +
            io::format_double(scale.max) + "]");
  for (const double t : c.rerank.thresholds) {
    check(errors, in_scale(t),
          "rerank.thresholds: " + io::format_double(t) + " outside the rating scale [" +
              io::format_double(scale.min) + ", " + io::format_double(scale.max) + "]");
  }
  check(errors, c.metrics.relevance_threshold >= scale.min &&
                    c.metrics.relevance_threshold <= scale.max,
        "metrics.relevance_threshold: outside the rating scale");

  if (c.rerank.kind == RerankerKind::kLrr) {
    // One item feature (log popularity) plus the ln m weight.
    c.lrr.init.weights.assign(2, 0.0);
    try {
      c.lrr.init.validate();
    } catch (const Error& e) {
      errors.push_back(std::string("lrr: ") + e.what());
    }
    check(errors, c.lrr.optimizer.step > 0.0, "lrr.step: must be > 0");
    check(errors, c.lrr.optimizer.iterations >= 0, "lrr.iters: must be >= 0");
  }
  if (c.rerank.kind == RerankerKind::kFair) {
    check(errors, !c.fair.etas.empty(), "fair.etas: must list at least one value");
    for (const double eta : c.fair.etas) {
      check(errors, std::isfinite(eta) && eta >= 0.0, "fair.etas: values must be >= 0");
    }
    if (c.fair.lambda) check(errors, *c.fair.lambda >= 0.0, "fair.lambda: must be >= 0");
    check(errors, c.simulate.sensitive.has_value(),
          "fair: needs simulate.sensitive_rule to define item groups");
  }
  check(errors, c.threads >= 1, "run.threads: must be >= 1");
  try {
    c.scenario = StakeholderScenario::parse(s.scenario.consumer, s.scenario.provider,
                                            s.scenario.system);
  } catch (const Error& e) {
    errors.push_back(std::string("scenario: ") + e.what());
  }
}

std::string purchase_name(const PurchaseModel& p) {
  return p.kind == PurchaseModel::Kind::kDecay ? "decay" : "guaranteed";
}

}  // namespace

std::string ExperimentConfig::echo() const {
  std::ostringstream o;
  auto kv = [&](const char* k, const std::string& v) { o << k << " = " << v << '\n'; };
  const auto d = io::format_double;
  kv("seed", std::to_string(seed));
  kv("dataset.path", dataset.path.generic_string());
  kv("dataset.format", dataset.format == RatingFormat::kTab ? "tab" : "double-colon");
  if (dataset.items) kv("dataset.items", dataset.items->generic_string());
  kv("dataset.rating_min", d(dataset.scale.min));
  kv("dataset.rating_max", d(dataset.scale.max));
  if (split.kind == SplitSpec::Kind::kKFold) {
    kv("split.kind", "kfold");
    kv("split.k", std::to_string(split.k));
  } else {
    kv("split.kind", "temporal");
    kv("split.cutoff", std::to_string(split.cutoff));
  }
  kv("split.max_folds", std::to_string(split.max_folds));
  kv("simulate.providers", std::to_string(simulate.providers));
  if (const auto* pl = std::get_if<PowerLawProviders>(&simulate.distribution)) {
    kv("simulate.provider_dist", "power_law");
    kv("simulate.power_exponent", d(pl->exponent));
  } else {
    kv("simulate.provider_dist", "uniform");
  }
  kv("simulate.margin_mu", d(simulate.profit.mu));
  kv("simulate.margin_sigma", d(simulate.profit.sigma));
  kv("simulate.margin_lo", d(simulate.profit.lo));
  kv("simulate.margin_hi", d(simulate.profit.hi));
  kv("simulate.commission", d(simulate.profit.commission));
  if (simulate.sensitive) kv("simulate.sensitive_rule", simulate.sensitive->to_string());
  kv("model.d", std::to_string(model.d));
  kv("model.learning_rate", d(model.learning_rate));
  kv("model.l2", d(model.l2_reg));
  kv("model.epochs", std::to_string(model.epochs));
  kv("rerank.kind", to_string(rerank.kind));
  kv("rerank.threshold", d(rerank.threshold));
  if (!rerank.thresholds.empty()) kv("rerank.thresholds", join_doubles(rerank.thresholds));
  kv("rerank.purchase", purchase_name(rerank.purchase));
  if (rerank.purchase.kind == PurchaseModel::Kind::kDecay) {
    kv("rerank.decay_alpha", d(rerank.purchase.alpha));
    kv("rerank.base_prob", d(rerank.purchase.base_prob));
  }
  kv("rerank.list_size", std::to_string(rerank.list_size));
  kv("rerank.candidates",
     rerank.candidates == CandidatePolicy::kAllUnrated ? "all_unrated" : "test_items");
  if (rerank.kind == RerankerKind::kLrr) {
    kv("lrr.alpha", d(lrr.init.alpha));
    kv("lrr.gamma", d(lrr.init.gamma));
    kv("lrr.theta_rank", d(lrr.init.theta_rank));
    kv("lrr.theta_smooth", d(lrr.init.theta_smooth));
    kv("lrr.grades", std::to_string(lrr.init.margin_grades));
    kv("lrr.step", d(lrr.optimizer.step));
    kv("lrr.iters", std::to_string(lrr.optimizer.iterations));
    kv("lrr.candidates", std::to_string(lrr.candidates));
    kv("lrr.max_lists", std::to_string(lrr.max_lists));
  }
  if (rerank.kind == RerankerKind::kFair) {
    kv("fair.etas", join_doubles(fair.etas));
    kv("fair.term", to_string(fair.term));
    if (fair.lambda) kv("fair.lambda", d(*fair.lambda));
  }
  kv("metrics.relevance_threshold", d(metrics.relevance_threshold));
  kv("metrics.discounted_exposure", metrics.discounted_exposure ? "true" : "false");
  kv("scenario", scenario.label());
  kv("output.dir", out_dir.generic_string());
  return o.str();
}

ConfigResult parse_config(std::string_view text, const fs::path& base_dir) {
  ParseState s;
  s.base_dir = base_dir;
  std::vector<std::string> errors;
  std::map<std::string, std::size_t, std::less<>> seen;
  std::size_t line_no = 0;
  for (auto line : io::split(text, '\n')) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = io::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) {
      errors.push_back(where + "expected key = value");
      continue;
    }
    const std::string key(io::trim(line.substr(0, eq)));
    const auto value = io::trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      errors.push_back(where + "unknown key '" + key + "'");
      continue;
    }
    if (const auto prev = seen.find(key); prev != seen.end()) {
      errors.push_back(where + key + ": duplicate of line " + std::to_string(prev->second));
      continue;
    }
    seen.emplace(key, line_no);
    if (value.empty()) {
      errors.push_back(where + key + ": empty value");
      continue;
    }
    try {
      it->second(s, value);
    } catch (const Error& e) {
      errors.push_back(where + key + ": " + e.what());
    }
  }
  cross_validate(s, errors);
  return {std::move(s.cfg), std::move(errors)};
}

std::vector<std::string> validate_config(const fs::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error& e) {
    return {e.what()};
  }
  return parse_config(text, path.parent_path()).errors;
}

ExperimentConfig load_config(const fs::path& path) {
  auto result = parse_config(io::read_file(path), path.parent_path());
  if (!result.ok()) {
    std::string msg = path.string() + ": " + std::to_string(result.errors.size()) +
                      " config error(s)";
    for (const auto& e : result.errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return std::move(result.config);
}

Stage parse_stage(std::string_view name) {
  if (name == "simulate") return Stage::kSimulate;
  if (name == "train") return Stage::kTrain;
  if (name == "rerank") return Stage::kRerank;
  if (name == "evaluate") return Stage::kEvaluate;
  if (name == "sweep") return Stage::kSweep;
  if (name == "run") return Stage::kRun;
  throw ConfigError("unknown stage '" + std::string(name) + "'");
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::kSimulate: return "simulate";
    case Stage::kTrain: return "train";
    case Stage::kRerank: return "rerank";
    case Stage::kEvaluate: return "evaluate";
    case Stage::kSweep: return "sweep";
    case Stage::kRun: return "run";
  }
  return "run";
}

const ReportFile* ReportBundle::find(std::string_view name) const {
  for (const auto& f : files) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

namespace {

struct Simulation {
  std::vector<ItemEconomics> econ;  // dense item order
  std::vector<double> margin;
  std::vector<std::int32_t> provider_of;
  std::vector<bool> item_sensitive;
  std::vector<bool> provider_sensitive;
  std::unique_ptr<bool[]> item_flags;  // contiguous copy of item_sensitive
  std::unique_ptr<bool[]> provider_flags;
  bool has_sensitive = false;

  std::span<const bool> items_view() const { return {item_flags.get(), item_sensitive.size()}; }
  std::span<const bool> providers_view() const {
    return {provider_flags.get(), provider_sensitive.size()};
  }
  std::vector<std::string> warnings;
};

Simulation simulate(const ExperimentConfig& cfg, const RatingsDataset& ds) {
  Simulation sim;
  const auto ids = ds.items().raw_ids();
  sim.econ = sample_item_profits(ids, cfg.simulate.profit, sub_seed(cfg.seed, 2));
  sim.provider_of = assign_providers(ids.size(), cfg.simulate.providers,
                                     cfg.simulate.distribution, sub_seed(cfg.seed, 1));
  sim.item_sensitive.assign(ids.size(), false);
  if (cfg.simulate.sensitive) {
    ItemAttributes attrs;
    attrs["year"] = load_item_years(*cfg.dataset.items);
    auto labels = label_sensitive(ids, attrs, *cfg.simulate.sensitive);
    sim.item_sensitive = std::move(labels.labels);
    sim.warnings = std::move(labels.warnings);
    sim.has_sensitive = true;
  }
  sim.margin.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    sim.econ[i].provider_id = sim.provider_of[i];
    sim.econ[i].sensitive = sim.item_sensitive[i];
    sim.margin[i] = sim.econ[i].margin;
  }
  // A provider counts as sensitive when its share of sensitive items is at
  // least the catalog-wide share.
  const auto n_p = static_cast<std::size_t>(cfg.simulate.providers);
  std::vector<double> total(n_p, 0.0), sens(n_p, 0.0);
  double all_sens = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    total[static_cast<std::size_t>(sim.provider_of[i])] += 1.0;
    if (sim.item_sensitive[i]) {
      sens[static_cast<std::size_t>(sim.provider_of[i])] += 1.0;
      all_sens += 1.0;
    }
  }
  const double share = ids.empty() ? 0.0 : all_sens / static_cast<double>(ids.size());
  sim.provider_sensitive.assign(n_p, false);
  for (std::size_t p = 0; p < n_p; ++p) {
    sim.provider_sensitive[p] = total[p] > 0.0 && sens[p] / total[p] >= share && share > 0.0;
  }
  sim.item_flags.reset(new bool[ids.size()]);
  for (std::size_t i = 0; i < ids.size(); ++i) sim.item_flags[i] = sim.item_sensitive[i];
  sim.provider_flags.reset(new bool[n_p]);
  for (std::size_t p = 0; p < n_p; ++p) sim.provider_flags[p] = sim.provider_sensitive[p];
  return sim;
}

std::vector<std::int32_t> test_users(const RatingsDataset& test) {
  std::vector<bool> has(test.n_users(), false);
  for (std::size_t k = 0; k < test.size(); ++k) has[static_cast<std::size_t>(test.user_of(k))] = true;
  std::vector<std::int32_t> out;
  for (std::size_t u = 0; u < has.size(); ++u) {
    if (has[u]) out.push_back(static_cast<std::int32_t>(u));
  }
  return out;
}

RankedList head(const RankedList& list, std::size_t n) {
  RankedList out;
  const std::size_t m = std::min(n, list.size());
  out.items.assign(list.items.begin(), list.items.begin() + static_cast<std::ptrdiff_t>(m));
  out.scores.assign(list.scores.begin(), list.scores.begin() + static_cast<std::ptrdiff_t>(m));
  out.truncated = n > list.size();
  return out;
}

// Standardized log popularity of each item in the training data.
std::vector<double> popularity_feature(const RatingsDataset& train) {
  std::vector<double> f(train.n_items(), 0.0);
  for (std::size_t k = 0; k < train.size(); ++k) f[static_cast<std::size_t>(train.item_of(k))] += 1.0;
  double mean = 0.0;
  for (auto& x : f) {
    x = std::log1p(x);
    mean += x;
  }
  mean /= static_cast<double>(std::max<std::size_t>(f.size(), 1));
  double var = 0.0;
  for (const double x : f) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(std::max<std::size_t>(f.size(), 1)));
  for (auto& x : f) x = sd > 0.0 ? (x - mean) / sd : 0.0;
  return f;
}

std::string lists_csv(const RatingsDataset& ds, std::span<const std::int32_t> users,
                      std::span<const RankedList> lists) {
  std::ostringstream out;
  out << "user_id,rank,item_id,score\n";
  for (std::size_t l = 0; l < users.size(); ++l) {
    for (std::size_t r = 0; r < lists[l].size(); ++r) {
      out << ds.users().raw(users[l]) << ',' << r + 1 << ','
          << ds.items().raw(lists[l].items[r]) << ',' << io::format_double(lists[l].scores[r])
          << '\n';
    }
  }
  return out.str();
}

Json number(double x) {
  if (std::isnan(x)) return nullptr;
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

struct FairRow {
  double eta = 0.0;
  double rmse = 0.0, mu0 = 0.0, mu1 = 0.0, gap = 0.0;
  double unfairness = std::nan("");
};

std::string fairness_csv(std::span<const FairRow> rows, IndependenceTerm term) {
  std::ostringstream out;
  out << "eta,term,rmse,group0_mean,group1_mean,gap,absolute_unfairness\n";
  for (const auto& r : rows) {
    out << io::format_double(r.eta) << ',' << to_string(term) << ','
        << io::format_double(r.rmse) << ',' << io::format_double(r.mu0) << ','
        << io::format_double(r.mu1) << ',' << io::format_double(r.gap) << ','
        << io::format_double(r.unfairness) << '\n';
  }
  return out.str();
}

double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (const double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

struct FoldOutcome {
  Json consumer;
  std::vector<SweepRow> sweep;
  std::vector<FairRow> fair;
};

}  // namespace

ReportBundle run_experiment(const ExperimentConfig& cfg, Stage stage) {
  const auto t0 = std::chrono::steady_clock::now();
  ReportBundle bundle;
  bundle.config_echo = cfg.echo();

  const auto ds = load_ratings(cfg.dataset.path, cfg.dataset.format, cfg.dataset.scale);
  const auto sim = simulate(cfg, ds);
  bundle.files.push_back({"economics.csv", economics_csv(sim.econ)});

  const bool want_lists = stage == Stage::kRerank || stage == Stage::kEvaluate ||
                          stage == Stage::kRun;
  const bool want_eval = stage == Stage::kEvaluate || stage == Stage::kRun;
  const bool want_sweep = stage == Stage::kSweep ||
                          (stage == Stage::kRun && !cfg.rerank.thresholds.empty());
  if (stage == Stage::kSweep && cfg.rerank.thresholds.empty()) {
    throw ConfigError("rerank.thresholds: the sweep needs a threshold grid");
  }

  std::vector<FoldOutcome> folds;
  if (stage != Stage::kSimulate) {
    SplitPlan plan = cfg.split.kind == SplitSpec::Kind::kKFold
                         ? split_random_kfold(ds, cfg.split.k, sub_seed(cfg.seed, 0))
                         : split_temporal(ds, cfg.split.cutoff);
    int n_folds = plan.n_folds();
    if (cfg.split.max_folds > 0) n_folds = std::min(n_folds, cfg.split.max_folds);

    TrainConfig mcfg = cfg.model;
    mcfg.seed = sub_seed(cfg.seed, 3);
    const RerankConfig served{cfg.rerank.threshold, cfg.rerank.list_size};
    const std::size_t n_list = cfg.rerank.list_size;

    for (int fold = 0; fold < n_folds; ++fold) {
      const std::string dir = "fold" + std::to_string(fold) + "/";
      const auto tt = materialize(ds, plan, fold);
      FoldOutcome outcome;

      // Models. The fair reranker serves the model of the last eta.
      FactorModel model;
      if (cfg.rerank.kind == RerankerKind::kFair) {
        for (const double eta : cfg.fair.etas) {
          FairnessConfig fc{eta, cfg.fair.lambda, cfg.fair.term};
          model = train_fair_mf(tt.train, sim.items_view(), mcfg, fc);
          if (!want_eval) continue;
          FairRow row;
          row.eta = eta;
          row.rmse = rmse(model, tt.test);
          const auto g = group_predictions(model, tt.test, sim.items_view());
          row.mu0 = mean_of(g.group0);
          row.mu1 = mean_of(g.group1);
          row.gap = std::fabs(row.mu0 - row.mu1);
          std::vector<TestRating> tr;
          for (std::size_t k = 0; k < tt.test.size(); ++k) {
            tr.push_back({tt.test.user_of(k), tt.test.item_of(k), tt.test.records()[k].rating,
                          model.predict_rating(tt.test.user_of(k), tt.test.item_of(k))});
          }
          try {
            row.unfairness = absolute_unfairness(tr, sim.items_view()).value;
          } catch (const UndefinedMetricError&) {
          }
          outcome.fair.push_back(row);
        }
      } else {
        model = train_mf(tt.train, mcfg);
      }
      if (stage == Stage::kTrain) {
        bundle.files.push_back({dir + "model.txt", model_text(model)});
        continue;
      }

      if (want_sweep) {
        SweepSpec spec;
        spec.thresholds = cfg.rerank.thresholds;
        spec.purchase = cfg.rerank.purchase;
        spec.list_size = n_list;
        spec.relevance_threshold = cfg.metrics.relevance_threshold;
        spec.candidates = cfg.rerank.candidates;
        spec.threads = cfg.threads;
        outcome.sweep = sweep_threshold(model, tt.train, tt.test, sim.margin, spec);
        bundle.files.push_back({dir + "sweep.csv", sweep_csv(outcome.sweep)});
      }
      if (!want_lists) {
        folds.push_back(std::move(outcome));
        continue;
      }

      const auto users = test_users(tt.test);
      const auto candidates = candidate_items(tt.train, tt.test, cfg.rerank.candidates);
      std::vector<RankedList> relevance(users.size()), lists(users.size());
      std::vector<RerankList> lrr_lists;
      const bool lrr = cfg.rerank.kind == RerankerKind::kLrr;
      const std::size_t depth = cfg.rerank.kind == RerankerKind::kGreedy
                                    ? std::numeric_limits<std::size_t>::max()
                                    : (lrr ? std::max(cfg.lrr.candidates, n_list) : n_list);
      parallel_for(users.size(), cfg.threads, [&](std::size_t l) {
        const auto& cand = candidates[static_cast<std::size_t>(users[l])];
        relevance[l] = top_n(model, users[l], cand, std::min(depth, cand.size()));
        if (cfg.rerank.kind == RerankerKind::kGreedy) {
          lists[l] = rerank_by_profit(relevance[l], sim.margin, served);
        } else {
          lists[l] = head(relevance[l], n_list);
        }
      });

      LrrTrainResult lrr_result;
      if (lrr) {
        const auto pop = popularity_feature(tt.train);
        const MarginGrader grader(sim.margin, cfg.lrr.init.margin_grades);
        for (std::size_t l = 0; l < users.size(); ++l) {
          const auto& rel = relevance[l];
          if (rel.size() < 2) continue;
          RerankList rl;
          rl.items = rel.items;
          rl.base = base_probabilities(rel.scores);
          for (const auto i : rel.items) {
            const auto& e = sim.econ[static_cast<std::size_t>(i)];
            rl.price.push_back(e.price);
            rl.margin.push_back(e.margin);
            rl.features.push_back({pop[static_cast<std::size_t>(i)]});
            rl.grades.push_back(grader.grade(e.margin));
          }
          lrr_lists.push_back(std::move(rl));
        }
        std::span<const RerankList> batch(lrr_lists);
        if (cfg.lrr.max_lists > 0 && batch.size() > cfg.lrr.max_lists) {
          batch = batch.first(cfg.lrr.max_lists);
        }
        LrrParams init = cfg.lrr.init;
        init.weights.assign(2, 0.0);
        LrrOptimizer opt = cfg.lrr.optimizer;
        opt.seed = sub_seed(cfg.seed, 4);
        lrr_result = train_lrr(batch, init, opt);
        bundle.files.push_back({dir + "lrr_params.json", lrr_params_json(lrr_result.params, opt)});
        bundle.files.push_back({dir + "lrr_log.csv", lrr_log_csv(lrr_result.log)});
        std::size_t next = 0;
        for (std::size_t l = 0; l < users.size(); ++l) {
          if (relevance[l].size() < 2) continue;
          auto ranked = rerank_lrr(lrr_lists[next++], lrr_result.params, n_list);
          lists[l] = std::move(ranked);
        }
      }
      bundle.files.push_back({dir + "lists.csv", lists_csv(ds, users, lists)});
      if (!want_eval) continue;

      // Evaluation.
      std::vector<TestRating> test;
      test.reserve(tt.test.size());
      for (std::size_t k = 0; k < tt.test.size(); ++k) {
        const auto u = tt.test.user_of(k), i = tt.test.item_of(k);
        test.push_back({u, i, tt.test.records()[k].rating, model.predict_rating(u, i)});
      }
      std::vector<std::vector<std::int32_t>> item_lists(lists.size());
      for (std::size_t l = 0; l < lists.size(); ++l) item_lists[l] = lists[l].items;

      EvalContext::TargetPredicate target;
      if (cfg.scenario.provider_reach == StakeholderScenario::ProviderReach::kPersonalized) {
        // Target market of a provider: users who rated any of its items in training.
        auto market = std::make_shared<std::vector<std::vector<bool>>>(
            static_cast<std::size_t>(cfg.simulate.providers),
            std::vector<bool>(ds.n_users(), false));
        for (std::size_t k = 0; k < tt.train.size(); ++k) {
          const auto p = sim.provider_of[static_cast<std::size_t>(tt.train.item_of(k))];
          (*market)[static_cast<std::size_t>(p)][static_cast<std::size_t>(tt.train.user_of(k))] = true;
        }
        target = [market](std::int32_t p, std::int32_t u) {
          return (*market)[static_cast<std::size_t>(p)][static_cast<std::size_t>(u)];
        };
      }
      const EvalContext ctx(users, item_lists, test, sim.provider_of, cfg.simulate.providers,
                            cfg.metrics.relevance_threshold, target);
      const auto cm = consumer_metrics(ctx, n_list);

      Json j;
      j["fold"] = fold;
      j["scenario"] = cfg.scenario.label();
      j["reranker"] = to_string(cfg.rerank.kind);
      j["train_ratings"] = tt.train.size();
      j["test_ratings"] = tt.test.size();
      j["list_users"] = users.size();
      j["relevant_users"] = cm.n_users;
      j["rmse"] = number(cm.rmse);
      j["f1_at_n"] = number(cm.f1_at_n);
      j["ndcg_at_n"] = number(cm.ndcg_at_n);
      if (cfg.rerank.kind != RerankerKind::kNone) {
        double base = 0.0, served_profit = 0.0;
        for (std::size_t l = 0; l < users.size(); ++l) {
          base += expected_profit_per_user(head(relevance[l], n_list), sim.margin,
                                           cfg.rerank.purchase);
          // Purchase probabilities follow the predicted rating, not the list score.
          RankedList priced = lists[l];
          for (std::size_t r = 0; r < priced.size(); ++r) {
            priced.scores[r] = model.score(users[l], priced.items[r]);
          }
          served_profit += expected_profit_per_user(priced, sim.margin, cfg.rerank.purchase);
        }
        const double n_u = static_cast<double>(std::max<std::size_t>(users.size(), 1));
        j["purchase"] = purchase_name(cfg.rerank.purchase);
        j["avg_profit_baseline"] = number(base / n_u);
        j["avg_profit"] = number(served_profit / n_u);
      }
      if (lrr && !lrr_lists.empty()) {
        j["lrr_mean_tau"] = number(mean_tau(lrr_lists, lrr_result.params));
        j["lrr_margin_ndcg"] = number(margin_ndcg(lrr_lists, lrr_result.params, n_list));
        j["base_margin_ndcg"] = number(base_margin_ndcg(lrr_lists, n_list));
      }
      if (sim.has_sensitive) {
        const auto fr = fairness_ratio(sim.providers_view(), ctx);
        Json f;
        f["value"] = number(fr.value);
        f["infinite"] = fr.infinite;
        f["undefined"] = fr.undefined;
        f["group0_rate"] = number(fr.group0_rate);
        f["group1_rate"] = number(fr.group1_rate);
        j["fairness_ratio"] = f;
      }
      outcome.consumer = j;
      bundle.files.push_back({dir + "consumer.json", j.dump(2) + "\n"});
      bundle.files.push_back({dir + "provider_report.csv",
                              provider_report_csv(provider_report(ctx))});
      if (cfg.metrics.discounted_exposure) {
        std::ostringstream out;
        out << "provider_id,exposure,discounted_exposure\n";
        for (int p = 0; p < cfg.simulate.providers; ++p) {
          out << p << ',' << exposure(p, ctx) << ','
              << io::format_double(discounted_exposure(p, ctx)) << '\n';
        }
        bundle.files.push_back({dir + "provider_exposure.csv", out.str()});
      }
      if (!outcome.fair.empty()) {
        bundle.files.push_back({dir + "fairness.csv", fairness_csv(outcome.fair, cfg.fair.term)});
      }
      folds.push_back(std::move(outcome));
    }
  }

  // Aggregates over folds, reduced in fold order.
  Json summary;
  summary["version"] = std::string(kVersion);
  summary["seed"] = cfg.seed;
  summary["stage"] = to_string(stage);
  summary["scenario"] = cfg.scenario.label();
  summary["items"] = ds.n_items();
  summary["users"] = ds.n_users();
  summary["ratings"] = ds.size();
  summary["folds"] = folds.size();
  summary["warnings"] = sim.warnings;
  if (want_eval && !folds.empty()) {
    Json mean;
    for (const char* key : {"rmse", "f1_at_n", "ndcg_at_n", "avg_profit_baseline", "avg_profit",
                            "lrr_mean_tau", "lrr_margin_ndcg", "base_margin_ndcg"}) {
      if (!folds.front().consumer.contains(key)) continue;
      double s = 0.0;
      for (const auto& f : folds) {
        const auto& v = f.consumer[key];
        s += v.is_number() ? v.get<double>() : std::nan("");
      }
      mean[key] = number(s / static_cast<double>(folds.size()));
    }
    summary["consumer_mean"] = mean;
  }
  if (!folds.empty() && !folds.front().sweep.empty()) {
    std::vector<SweepRow> agg = folds.front().sweep;
    for (auto& r : agg) r.avg_profit = r.f1_at_n = r.ndcg_at_n = 0.0;
    for (const auto& f : folds) {
      for (std::size_t c = 0; c < agg.size(); ++c) {
        agg[c].avg_profit += f.sweep[c].avg_profit;
        agg[c].f1_at_n += f.sweep[c].f1_at_n;
        agg[c].ndcg_at_n += f.sweep[c].ndcg_at_n;
      }
    }
    const double n = static_cast<double>(folds.size());
    for (auto& r : agg) {
      r.avg_profit /= n;
      r.f1_at_n /= n;
      r.ndcg_at_n /= n;
    }
    bundle.files.push_back({"sweep.csv", sweep_csv(agg)});
  }
  if (!folds.empty() && !folds.front().fair.empty()) {
    std::vector<FairRow> agg(folds.front().fair.size());
    for (std::size_t r = 0; r < agg.size(); ++r) {
      agg[r].eta = folds.front().fair[r].eta;
      agg[r].unfairness = 0.0;
      for (const auto& f : folds) {
        agg[r].rmse += f.fair[r].rmse;
        agg[r].mu0 += f.fair[r].mu0;
        agg[r].mu1 += f.fair[r].mu1;
        agg[r].gap += f.fair[r].gap;
        agg[r].unfairness += f.fair[r].unfairness;
      }
      const double n = static_cast<double>(folds.size());
      agg[r].rmse /= n;
      agg[r].mu0 /= n;
      agg[r].mu1 /= n;
      agg[r].gap /= n;
      agg[r].unfairness /= n;
    }
    bundle.files.push_back({"fairness.csv", fairness_csv(agg, cfg.fair.term)});
  }
  bundle.files.push_back({"summary.json", summary.dump(2) + "\n"});

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Json meta;
  meta["version"] = std::string(kVersion);
  meta["seed"] = cfg.seed;
  meta["stage"] = to_string(stage);
  meta["threads"] = cfg.threads;
  meta["wall_seconds"] = secs;
  bundle.run_meta = meta.dump(2) + "\n";
  return bundle;
}

void write_bundle(const ReportBundle& bundle, const fs::path& out_dir) {
  io::write_file_atomic(out_dir / "config.txt", bundle.config_echo);
  for (const auto& f : bundle.files) io::write_file_atomic(out_dir / f.name, f.body);
  io::write_file_atomic(out_dir / "run_meta.json", bundle.run_meta);
}

}  // namespace msrec
