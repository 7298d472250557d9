// Copyright 2026 The mobexp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mobexp/exposure.h"
#include "mobexp/pipeline.h"
#include "mobexp/sem.h"
#include "mobexp/synth.h"

namespace py = pybind11;

namespace mobexp {
namespace {

BucketScheme Scheme(const std::optional<std::vector<double>>& edges,
                    const std::optional<std::vector<double>>& mu) {
  if (!edges && !mu) return BucketScheme::Default();
  if (!edges || !mu) {
    throw ConfigError("bucket edges and representatives go together");
  }
  return BucketScheme(*edges, *mu);
}

py::dict EstimateDict(const sem::SemEstimate& est) {
  py::dict out;
  py::dict estimate, se;
  for (std::size_t k = 0; k < est.names.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    estimate[py::str(est.names[k])] = est.estimate[i];
    if (est.std_error) se[py::str(est.names[k])] = (*est.std_error)[i];
  }
  out["estimate"] = estimate;
  out["std_error"] = est.std_error ? py::object(se) : py::none();
  out["f_ml"] = est.f_ml;
  out["grad_inf_norm"] = est.grad_inf_norm;
  out["converged"] = est.converged;
  out["n_obs"] = est.n_obs;
  out["diagnostic"] = est.diagnostic;
  return out;
}

int RunStage(const std::string& stage, const std::filesystem::path& input_dir,
             const std::filesystem::path& output_dir, std::uint64_t seed,
             int threads, const std::optional<std::string>& start_date,
             const std::optional<std::string>& end_date,
             const std::string& attribution, std::size_t min_n,
             std::size_t synth_zctas, std::size_t synth_pois) {
  pipeline::RunConfig cfg;
  cfg.input_dir = input_dir;
  cfg.output_dir = output_dir;
  cfg.seed = seed;
  cfg.threads = threads;
  if (start_date) cfg.start_date = Date::Parse(*start_date);
  if (end_date) cfg.end_date = Date::Parse(*end_date);
  if (attribution == "origin") {
    cfg.attribution = pipeline::CeiAttribution::kOrigin;
  } else if (attribution == "destination") {
    cfg.attribution = pipeline::CeiAttribution::kDestination;
  } else {
    throw ConfigError("attribution must be origin or destination");
  }
  cfg.min_rows = min_n;
  cfg.synth_zctas = synth_zctas;
  cfg.synth_pois = synth_pois;
  py::gil_scoped_release release;
  return pipeline::RunStage(stage, cfg);
}

}  // namespace
}  // namespace mobexp

PYBIND11_MODULE(_core, m) {
  using namespace mobexp;
  m.doc() = "Contact exposure and daily SEM estimation core.";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def(
      "contact_duration",
      [](const std::vector<double>& counts,
         const std::optional<std::vector<double>>& edges,
         const std::optional<std::vector<double>>& mu) {
        return ContactDuration(counts, Scheme(edges, mu));
      },
      py::arg("counts"), py::arg("edges") = py::none(),
      py::arg("mu") = py::none(),
      "Total pairwise contact minutes for per-bucket visitor counts.");
  m.def(
      "contact_duration_oracle",
      [](const std::vector<double>& dwell) {
        return ContactDurationOracle(dwell);
      },
      py::arg("dwell_minutes"), "Brute-force sum of min(d_a, d_b) over pairs.");
  m.def("cei_poi_hour", &CeiPoiHour, py::arg("tau_minutes"),
        py::arg("area_sqft"));

  m.def("param_names",
        [] { return sem::ModelSpec::Default().param_names(); });
  m.def("observed_names",
        [] { return sem::ModelSpec::Default().observed_names(); });
  m.def(
      "default_truth",
      [] {
        const auto spec = sem::ModelSpec::Default();
        return Eigen::VectorXd(
            synth::SynthConfig::DefaultTruth().Natural(spec));
      },
      "Natural-scale parameters used by the synthetic generator.");
  m.def(
      "implied_covariance",
      [](const Eigen::VectorXd& natural, const Eigen::MatrixXd& exo_cov) {
        const auto spec = sem::ModelSpec::Default();
        return sem::ImpliedCovariance(sem::ToInternal(natural, spec), spec,
                                      exo_cov);
      },
      py::arg("natural"), py::arg("exo_cov"));
  m.def(
      "ml_discrepancy",
      [](const Eigen::VectorXd& natural, const Eigen::MatrixXd& sample_cov) {
        const auto spec = sem::ModelSpec::Default();
        return sem::MlDiscrepancy(sem::ToInternal(natural, spec), sample_cov,
                                  spec, sem::ExogenousBlock(sample_cov, spec))
            .value;
      },
      py::arg("natural"), py::arg("sample_cov"));
  m.def(
      "fit",
      [](const Eigen::MatrixXd& data, std::uint64_t seed) {
        const auto spec = sem::ModelSpec::Default();
        if (data.cols() != static_cast<Eigen::Index>(spec.n_observed())) {
          throw ConfigError("data needs one column per observed variable");
        }
        sem::FitOptions opts;
        opts.seed = seed;
        const auto n = static_cast<std::size_t>(data.rows());
        if (n < opts.min_rows) {
          throw DataError("need at least " + std::to_string(opts.min_rows) +
                          " rows, got " + std::to_string(n));
        }
        return EstimateDict(sem::FitCovariance(sem::SampleCovariance(data), n,
                                               spec, opts));
      },
      py::arg("data"), py::arg("seed") = 0,
      "Fits the daily model to an N x 11 matrix in observed_names() order.");
  m.def(
      "synth_panel",
      [](std::uint64_t seed, std::size_t n_zcta,
         const std::optional<double>& beta_eta) {
        synth::SynthConfig cfg;
        cfg.seed = seed;
        cfg.n_zcta = n_zcta;
        cfg.n_poi = 0;
        cfg.end = cfg.start;
        if (beta_eta) cfg.truth.beta_eta = *beta_eta;
        const auto panel =
            synth::GeneratePanels(cfg, synth::GenerateCity(cfg)).front();
        return Eigen::MatrixXd(
            sem::ModelSpec::Default().ObservedMatrix(panel));
      },
      py::arg("seed") = 42, py::arg("n_zcta") = 200,
      py::arg("beta_eta") = py::none(),
      "One synthetic day as an N x 11 matrix in observed_names() order.");
  m.def("run_stage", &RunStage, py::arg("stage"), py::arg("input_dir"),
        py::arg("output_dir"), py::arg("seed") = 42, py::arg("threads") = 1,
        py::arg("start_date") = py::none(), py::arg("end_date") = py::none(),
        py::arg("attribution") = "origin", py::arg("min_n") = 30,
        py::arg("synth_zctas") = 100, py::arg("synth_pois") = 1000,
        "Runs a pipeline stage like the CLI; returns its exit status.");
  m.def("file_digest", &pipeline::FileDigest, py::arg("path"));
}
