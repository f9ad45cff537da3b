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

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "msrec/errors.hpp"
#include "msrec/experiment.hpp"

namespace {

int report_error(const char* kind, const std::string& message, int code) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  std::cerr << j.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-stakeholder recommendation experiments"};
  app.set_version_flag("--version", std::string(msrec::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<int> threads;
  app.add_option("--config", config_path, "Experiment config file")->required();
  app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--out-dir", out_dir, "Override the output directory");
  app.add_option("--threads", threads, "Override run.threads")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "Check a config and list every problem");
  const std::pair<const char*, const char*> stages[] = {
      {"simulate", "Sample item economics, providers and sensitive labels"},
      {"train", "Train the rating model on every fold and dump it"},
      {"rerank", "Produce the served recommendation lists"},
      {"evaluate", "Consumer, provider and system reports"},
      {"sweep", "Profit and accuracy over the threshold grid"},
      {"run", "Full pipeline"},
  };
  for (const auto& [name, help] : stages) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (validate->parsed()) {
      const auto errors = msrec::validate_config(config_path);
      if (errors.empty()) {
        std::cout << "ok\n";
        return 0;
      }
      for (const auto& e : errors) std::cerr << e << '\n';
      return 1;
    }

    auto cfg = msrec::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (!out_dir.empty()) {
      cfg.out_dir = out_dir;
    } else if (const char* env = std::getenv("MSREC_OUT_DIR"); env && *env) {
      cfg.out_dir = env;
    }
    const auto stage = msrec::parse_stage(app.get_subcommands().front()->get_name());
    const auto bundle = msrec::run_experiment(cfg, stage);
    msrec::write_bundle(bundle, cfg.out_dir);
    std::cout << "wrote " << bundle.files.size() + 2 << " files to "
              << cfg.out_dir.string() << '\n';
    return 0;
  } catch (const msrec::ConfigError& e) {
    return report_error("config", e.what(), 1);
  } catch (const msrec::Error& e) {
    return report_error("runtime", e.what(), 2);
  } catch (const std::exception& e) {
    return report_error("runtime", e.what(), 2);
  }
}
