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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msrec/dataset.hpp"
#include "msrec/fairness.hpp"
#include "msrec/greedy_rerank.hpp"
#include "msrec/lrr.hpp"
#include "msrec/mf.hpp"

namespace msrec {

inline constexpr std::string_view kVersion = "0.1.0";

struct DatasetSpec {
  std::filesystem::path path;
  RatingFormat format = RatingFormat::kTab;
  std::optional<std::filesystem::path> items;  // item metadata (u.item layout)
  RatingScale scale;
};

struct SplitSpec {
  enum class Kind { kKFold, kTemporal };
  Kind kind = Kind::kKFold;
  int k = 5;
  int max_folds = 0;  // 0 runs every fold
  std::int64_t cutoff = 0;
};

struct SimulationSpec {
  int providers = 10;
  ProviderDistribution distribution = UniformProviders{};
  ProfitSpec profit;
  std::optional<SensitiveRule> sensitive;
};

enum class RerankerKind { kNone, kGreedy, kLrr, kFair };

struct RerankSpec {
  RerankerKind kind = RerankerKind::kNone;
  double threshold = 4.5;           // T_R of the served lists
  std::vector<double> thresholds;   // sweep grid
  PurchaseModel purchase;
  std::size_t list_size = 10;
  CandidatePolicy candidates = CandidatePolicy::kAllUnrated;
};

struct LrrSpec {
  LrrParams init;
  LrrOptimizer optimizer;
  std::size_t candidates = 50;  // per-user list length fed to the re-ranker
  std::size_t max_lists = 0;    // 0 trains on every list
};

struct FairSpec {
  std::vector<double> etas{0.0};
  IndependenceTerm term = IndependenceTerm::kMeanMatching;
  std::optional<double> lambda;
};

struct MetricsSpec {
  double relevance_threshold = 4.0;
  bool discounted_exposure = false;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DatasetSpec dataset;
  SplitSpec split;
  SimulationSpec simulate;
  TrainConfig model;
  RerankSpec rerank;
  LrrSpec lrr;
  FairSpec fair;
  MetricsSpec metrics;
  StakeholderScenario scenario;
  int threads = 1;
  std::filesystem::path out_dir = "out";

  // Canonical key = value listing of every setting.
  std::string echo() const;
};

struct ConfigResult {
  ExperimentConfig config;
  std::vector<std::string> errors;

  bool ok() const { return errors.empty(); }
};

// Relative paths in the text resolve against base_dir.
ConfigResult parse_config(std::string_view text,
                          const std::filesystem::path& base_dir = {});

// Every problem found in the file; empty when the config is valid.
std::vector<std::string> validate_config(const std::filesystem::path& path);

// Throws ConfigError listing all problems.
ExperimentConfig load_config(const std::filesystem::path& path);

enum class Stage { kSimulate, kTrain, kRerank, kEvaluate, kSweep, kRun };

Stage parse_stage(std::string_view name);
std::string to_string(Stage stage);

// Seed of one random stream of a run: 0 split, 1 providers, 2 margins,
// 3 model, 4 re-ranker.
inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream) {
  return seed + stream * 0x9E3779B97F4A7C15ULL;
}

struct ReportFile {
  std::string name;  // relative to the output directory
  std::string body;
};

struct ReportBundle {
  std::string config_echo;
  std::vector<ReportFile> files;  // deterministic for a given config
  std::string run_meta;           // JSON with wall time, threads, version

  const ReportFile* find(std::string_view name) const;
};

ReportBundle run_experiment(const ExperimentConfig& cfg, Stage stage = Stage::kRun);

// Writes every file of the bundle plus config.txt and run_meta.json, each
// through a temp file and rename.
void write_bundle(const ReportBundle& bundle, const std::filesystem::path& out_dir);

}  // namespace msrec
