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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <string>
#include <vector>

#include "msrec/dataset.hpp"
#include "msrec/errors.hpp"
#include "msrec/experiment.hpp"
#include "msrec/fairness.hpp"
#include "msrec/greedy_rerank.hpp"
#include "msrec/lrr.hpp"
#include "msrec/metrics.hpp"
#include "msrec/mf.hpp"

namespace py = pybind11;
using namespace msrec;

namespace {

RankedList make_list(std::vector<std::int32_t> items, std::vector<double> scores) {
  if (items.size() != scores.size()) throw ContractError("items and scores differ in length");
  RankedList l;
  l.items = std::move(items);
  l.scores = std::move(scores);
  return l;
}

PurchaseModel make_purchase(const std::string& kind, double alpha, double base_prob) {
  if (kind == "guaranteed") return PurchaseModel::guaranteed();
  if (kind == "decay") {
    auto m = PurchaseModel::decay(alpha, base_prob);
    m.validate();
    return m;
  }
  throw ConfigError("purchase model must be guaranteed|decay");
}

py::dict bundle_dict(const ReportBundle& b) {
  py::dict files;
  for (const auto& f : b.files) files[py::str(f.name)] = py::str(f.body);
  return files;
}

}  // namespace

PYBIND11_MODULE(_msrec, m) {
  m.doc() = "Multistakeholder recommendation toolkit";
  m.attr("__version__") = kVersion;

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());

  // Data and model.
  py::class_<RatingsDataset>(m, "RatingsDataset")
      .def_property_readonly("size", &RatingsDataset::size)
      .def_property_readonly("n_users", &RatingsDataset::n_users)
      .def_property_readonly("n_items", &RatingsDataset::n_items)
      .def("mean_rating", &RatingsDataset::mean_rating)
      .def("__len__", &RatingsDataset::size);

  m.def("load_ratings", [](const std::filesystem::path& path, const std::string& format) {
          return load_ratings(path, parse_rating_format(format));
        }, py::arg("path"), py::arg("format") = "tab");
  m.def("parse_ratings", [](const std::string& text, const std::string& format) {
          return parse_ratings(text, parse_rating_format(format));
        }, py::arg("text"), py::arg("format") = "tab");

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("d", &TrainConfig::d)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("l2_reg", &TrainConfig::l2_reg)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<FactorModel>(m, "FactorModel")
      .def_property_readonly("d", &FactorModel::d)
      .def_property_readonly("n_users", &FactorModel::n_users)
      .def_property_readonly("n_items", &FactorModel::n_items)
      .def_property_readonly("global_mean", &FactorModel::global_mean)
      .def("score", &FactorModel::score, py::arg("user"), py::arg("item"))
      .def("predict_rating", &FactorModel::predict_rating, py::arg("user"), py::arg("item"))
      .def("top_n", [](const FactorModel& model, std::int32_t user,
                       const std::vector<std::int32_t>& candidates, std::size_t n) {
             return top_n(model, user, candidates, n).items;
           }, py::arg("user"), py::arg("candidates"), py::arg("n"));

  m.def("train_mf", [](const RatingsDataset& ds, const TrainConfig& cfg) {
          py::gil_scoped_release release;
          return train_mf(ds, cfg);
        }, py::arg("dataset"), py::arg("config") = TrainConfig{});
  m.def("rmse", &rmse, py::arg("model"), py::arg("dataset"));

  // Greedy re-ranking.
  m.def("rerank_by_profit",
        [](std::vector<std::int32_t> items, std::vector<double> scores,
           const std::vector<double>& margin, double threshold, std::size_t n) {
          RerankConfig cfg;
          cfg.threshold = threshold;
          cfg.list_size = n;
          return rerank_by_profit(make_list(std::move(items), std::move(scores)), margin, cfg).items;
        },
        py::arg("items"), py::arg("scores"), py::arg("margin"), py::arg("threshold"),
        py::arg("n") = 10);
  m.def("purchase_probability",
        [](double rating, const std::string& kind, double alpha, double base_prob) {
          return purchase_probability(rating, make_purchase(kind, alpha, base_prob));
        },
        py::arg("rating"), py::arg("model") = "decay", py::arg("alpha") = -1.5,
        py::arg("base_prob") = 0.1);
  m.def("expected_profit",
        [](std::vector<std::int32_t> items, std::vector<double> scores,
           const std::vector<double>& margin, const std::string& kind, double alpha,
           double base_prob) {
          return expected_profit_per_user(make_list(std::move(items), std::move(scores)), margin,
                                          make_purchase(kind, alpha, base_prob));
        },
        py::arg("items"), py::arg("scores"), py::arg("margin"),
        py::arg("model") = "guaranteed", py::arg("alpha") = -1.5, py::arg("base_prob") = 0.1);

  // Ranking primitives.
  m.def("kendall_tau", [](const std::vector<double>& u, const std::vector<double>& v) {
          return kendall_tau_exact(u, v);
        }, py::arg("u"), py::arg("v"));
  m.def("kendall_kernel", [](const std::vector<double>& u, const std::vector<double>& v,
                             double theta) { return kendall_kernel(u, v, theta); },
        py::arg("u"), py::arg("v"), py::arg("theta") = 10.0);
  m.def("phi_map", [](const std::vector<double>& u) { return phi_map(u); }, py::arg("u"));
  m.def("phi_smooth", [](const std::vector<double>& u, double theta) {
          return phi_smooth(u, theta);
        }, py::arg("u"), py::arg("theta") = 10.0);
  m.def("lambdarank_loss", [](const std::vector<double>& grades, const std::vector<double>& scores,
                              double theta) { return lambdarank_loss(grades, scores, theta); },
        py::arg("grades"), py::arg("scores"), py::arg("theta") = 1.0);

  // Fairness.
  m.def("independence",
        [](const std::string& term, std::vector<double> group0, std::vector<double> group1) {
          return independence(parse_independence_term(term), {std::move(group0), std::move(group1)});
        },
        py::arg("term"), py::arg("group0"), py::arg("group1"));

  // Metrics.
  m.def("ndcg_at_n", [](const std::vector<double>& list_grades,
                        const std::vector<double>& ideal_grades, std::size_t n) {
          return ndcg_at_n(list_grades, ideal_grades, n);
        }, py::arg("list_grades"), py::arg("ideal_grades"), py::arg("n"));
  m.def("moments", [](const std::vector<double>& values) {
          const auto mo = moments(values);
          py::dict d;
          d["mean"] = mo.mean;
          d["variance"] = mo.variance;
          d["skewness"] = mo.skewness;
          return d;
        }, py::arg("values"));

  // Experiments.
  m.def("validate_config", &validate_config, py::arg("path"));
  m.def("run_experiment",
        [](const std::filesystem::path& path, const std::string& stage,
           std::optional<std::filesystem::path> out_dir, std::optional<int> threads) {
          auto cfg = load_config(path);
          if (threads) cfg.threads = *threads;
          ReportBundle bundle;
          {
            py::gil_scoped_release release;
            bundle = run_experiment(cfg, parse_stage(stage));
            if (out_dir) write_bundle(bundle, *out_dir);
          }
          return bundle_dict(bundle);
        },
        py::arg("config"), py::arg("stage") = "run", py::arg("out_dir") = py::none(),
        py::arg("threads") = py::none());
}
