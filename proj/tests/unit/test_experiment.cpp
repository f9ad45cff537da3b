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

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "msrec/errors.hpp"
#include "msrec/experiment.hpp"
#include "msrec/io.hpp"

using namespace msrec;

namespace {

const std::filesystem::path kData = MSREC_TEST_DATA;
const std::filesystem::path kConfigs = MSREC_CONFIG_DIR;

std::string golden_text() { return io::read_file(kData / "golden.conf"); }

std::string replace_line(std::string text, const std::string& key, const std::string& line) {
  const auto pos = text.find("\n" + key + " ");
  REQUIRE(pos != std::string::npos);
  const auto end = text.find('\n', pos + 1);
  return text.replace(pos + 1, end - pos - 1, line);
}

bool mentions(const std::vector<std::string>& errors, const std::string& needle) {
  return std::any_of(errors.begin(), errors.end(),
                     [&](const std::string& e) { return e.find(needle) != std::string::npos; });
}

}  // namespace

TEST_CASE("golden and reference configs validate") {
  CHECK(validate_config(kData / "golden.conf").empty());
  CHECK(validate_config(kConfigs / "movielens-100k.conf").empty());
  CHECK(validate_config(kConfigs / "movielens-100k-lrr.conf").empty());
  const auto cfg = load_config(kData / "golden.conf");
  CHECK(cfg.seed == 7);
  CHECK(cfg.model.d == 8);
  CHECK(cfg.rerank.thresholds.size() == 5);
}

TEST_CASE("missing seed is reported") {
  auto text = golden_text();
  text = replace_line(text, "seed", "# no seed");
  const auto r = parse_config(text, kData);
  CHECK_FALSE(r.ok());
  CHECK(mentions(r.errors, "seed"));
}

TEST_CASE("threshold outside the rating scale is reported") {
  const auto r = parse_config(replace_line(golden_text(), "rerank.threshold", "rerank.threshold = 7"), kData);
  CHECK(mentions(r.errors, "rerank.threshold"));
}

TEST_CASE("all problems are listed together") {
  const auto errors = validate_config(kData / "broken.conf");
  CHECK(errors.size() >= 4);
  CHECK(mentions(errors, "seed"));
  CHECK(mentions(errors, "colour"));
  CHECK_THROWS_AS(load_config(kData / "broken.conf"), ConfigError);
}

TEST_CASE("unknown and duplicate keys carry line numbers") {
  const auto r = parse_config("seed = 1\nseed = 2\nfoo.bar = 3\nmodel.d =\n", kData);
  CHECK(mentions(r.errors, "line 2"));
  CHECK(mentions(r.errors, "line 3"));
  CHECK(mentions(r.errors, "line 4"));
}

TEST_CASE("stage names round trip") {
  for (auto s : {Stage::kSimulate, Stage::kTrain, Stage::kRerank, Stage::kEvaluate,
                 Stage::kSweep, Stage::kRun}) {
    CHECK(parse_stage(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_stage("deploy"), ConfigError);
}

TEST_CASE("no reranker means no profit columns") {
  auto text = replace_line(golden_text(), "rerank.kind", "rerank.kind = none");
  text = replace_line(text, "rerank.thresholds", "# no sweep");
  auto r = parse_config(text, kData);
  REQUIRE(r.ok());
  const auto bundle = run_experiment(r.config, Stage::kEvaluate);
  const auto* consumer = bundle.find("fold0/consumer.json");
  REQUIRE(consumer != nullptr);
  const auto j = nlohmann::json::parse(consumer->body);
  CHECK_FALSE(j.contains("avg_profit"));
  CHECK_FALSE(j.contains("avg_profit_baseline"));
  CHECK(j.contains("ndcg_at_n"));
  CHECK(bundle.find("sweep.csv") == nullptr);
}

TEST_CASE("golden run is deterministic across thread counts") {
  auto cfg = load_config(kData / "golden.conf");
  const auto a = run_experiment(cfg);
  const auto b = run_experiment(cfg);
  cfg.threads = 4;
  const auto c = run_experiment(cfg);
  REQUIRE(a.files.size() == b.files.size());
  REQUIRE(a.files.size() == c.files.size());
  for (std::size_t k = 0; k < a.files.size(); ++k) {
    CAPTURE(a.files[k].name);
    CHECK(a.files[k].name == c.files[k].name);
    CHECK(a.files[k].body == b.files[k].body);
    CHECK(a.files[k].body == c.files[k].body);
  }
  CHECK(a.find("sweep.csv") != nullptr);
  CHECK(a.find("summary.json") != nullptr);
  CHECK(a.find("fold0/provider_report.csv") != nullptr);
}

TEST_CASE("bundle is written atomically") {
  const auto cfg = load_config(kData / "golden.conf");
  const auto bundle = run_experiment(cfg, Stage::kSimulate);
  const auto dir = std::filesystem::temp_directory_path() / "msrec_bundle_test";
  std::filesystem::remove_all(dir);
  write_bundle(bundle, dir);
  CHECK(std::filesystem::exists(dir / "config.txt"));
  CHECK(std::filesystem::exists(dir / "run_meta.json"));
  for (const auto& f : bundle.files) {
    CHECK(io::read_file(dir / f.name) == f.body);
  }
  std::filesystem::remove_all(dir);
}
