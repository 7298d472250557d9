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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mobexp/exposure.h"
#include "mobexp/pipeline.h"
#include "mobexp/sem.h"
#include "mobexp/synth.h"
#include "test_util.h"

namespace mobexp {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

int failures = 0;

void Report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s (%s)\n", id, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string Fmt(const char* fmt, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, a, b, c);
  return buf;
}

void WorkedExample() {
  const BucketScheme scheme({0, 15, 30}, {10, 20, 40});
  const std::vector<double> n = {2, 3, 1};
  const auto start = Clock::now();
  const double tau = ContactDuration(n, scheme);
  const double ms = Seconds(start) * 1e3;
  Report(1, tau == 210.0 && ms < 1.0,
         Fmt("contact duration %.17g min in %.4f ms", tau, ms));
}

void OracleEquivalence() {
  const BucketScheme scheme = BucketScheme::Default();
  std::mt19937_64 rng(20260401);
  std::uniform_int_distribution<int> count(0, 50);
  const int trials = 2000;
  double worst = 0.0;
  const auto start = Clock::now();
  for (int t = 0; t < trials; ++t) {
    std::vector<double> n(4);
    std::vector<double> dwell;
    for (std::size_t b = 0; b < 4; ++b) {
      n[b] = count(rng);
      dwell.insert(dwell.end(), static_cast<std::size_t>(n[b]),
                   scheme.representatives()[b]);
    }
    worst = std::max(worst, std::abs(ContactDuration(n, scheme) -
                                     ContactDurationOracle(dwell)));
  }
  const double s = Seconds(start);
  Report(2, worst <= 1e-9 && s < 1.0,
         Fmt("%g vectors, max abs diff %.3g, %.3f s", trials, worst, s));
}

struct MicroCity {
  synth::City city;
  synth::Micro micro;
};

// Whole weeks starting on a Monday, trimmed to `days`.
MicroCity MakeMicro(std::size_t n_poi, int days, std::uint64_t seed) {
  synth::SynthConfig cfg;
  cfg.seed = seed;
  cfg.n_zcta = 100;
  cfg.n_poi = n_poi;
  cfg.window = 0;
  cfg.start = Date::Parse("2020-03-02");
  cfg.end = cfg.start + (days - 1);
  MicroCity m{synth::GenerateCity(cfg), {}};
  m.micro = synth::GenerateMicro(cfg, m.city);
  std::erase_if(m.micro.patterns.visits,
                [&](const auto& kv) { return kv.first.date > cfg.end; });
  return m;
}

void Conservation() {
  const auto m = MakeMicro(1000, 30, 7);
  const auto start = Clock::now();
  const auto run = ComputeCei(m.micro.patterns.visits, m.micro.patterns.dwell,
                              m.city.pois, BucketScheme::Default());
  std::map<Date, double> total;
  for (const auto& r : run.poi_day) total[r.date] += r.value;

  std::map<Date, double> industry, origin;
  for (const auto& r : DecomposeByIndustry(run.poi_day, m.city.pois,
                                           pipeline::DefaultIndustryGroups())) {
    industry[r.date] += r.cei;
  }
  const auto attributed = AttributeToOrigins(run.poi_day,
                                             m.micro.patterns.origins);
  for (const auto& r : attributed.attributed) origin[r.date] += r.value;
  for (const auto& [d, v] : attributed.unattributed) origin[d] += v;
  const double s = Seconds(start);

  double worst = 0.0;
  for (const auto& [d, t] : total) {
    worst = std::max(worst, std::abs(industry[d] - t) / t);
    worst = std::max(worst, std::abs(origin[d] - t) / t);
  }
  const bool shaped = total.size() == 30 && industry.size() == 30 &&
                      origin.size() == 30 && run.poi_day.size() == 30000;
  Report(3, shaped && worst <= 1e-9 && s < 5.0,
         Fmt("%g POI-days, max relative resum error %.3g, %.3f s",
             static_cast<double>(run.poi_day.size()), worst, s));
}

sem::Panel SynthPanel(std::uint64_t seed, double beta_eta) {
  synth::SynthConfig cfg;
  cfg.seed = seed;
  cfg.n_zcta = 200;
  cfg.n_poi = 0;
  cfg.end = cfg.start;
  cfg.truth.beta_eta = beta_eta;
  return synth::GeneratePanels(cfg, synth::GenerateCity(cfg)).front();
}

struct RecoveryStats {
  int reps = 0;
  int converged = 0;
  int with_se = 0;
  double worst_grad = 0.0;
  std::vector<int> covered;
  int income_sign = 0;
  double seconds = 0.0;
};

RecoveryStats Recovery(double beta_eta, std::uint64_t base_seed) {
  const auto spec = sem::ModelSpec::Default();
  auto truth_params = synth::SynthConfig::DefaultTruth();
  truth_params.beta_eta = beta_eta;
  const VectorXd truth = truth_params.Natural(spec);
  RecoveryStats st;
  st.covered.assign(spec.n_params(), 0);
  const auto start = Clock::now();
  for (int rep = 0; rep < 50; ++rep) {
    const auto est = sem::FitDaily(
        SynthPanel(base_seed + static_cast<std::uint64_t>(rep), beta_eta), spec);
    ++st.reps;
    if (!est.converged) continue;
    ++st.converged;
    st.worst_grad = std::max(st.worst_grad, est.grad_inf_norm);
    if (est.Get("beta_S_income") < 0.0) ++st.income_sign;
    if (!est.std_error) continue;
    ++st.with_se;
    for (Eigen::Index k = 0; k < truth.size(); ++k) {
      if (std::abs(est.estimate[k] - truth[k]) <= 2.0 * (*est.std_error)[k]) {
        ++st.covered[static_cast<std::size_t>(k)];
      }
    }
  }
  st.seconds = Seconds(start);
  return st;
}

void GradientSanity(const RecoveryStats& fits) {
  const auto spec = sem::ModelSpec::Default();
  const MatrixXd s =
      sem::SampleCovariance(spec.ObservedMatrix(SynthPanel(5, 0.8)));
  const MatrixXd exo = sem::ExogenousBlock(s, spec);
  const VectorXd base = synth::SynthConfig::DefaultTruth().Internal(spec);
  std::mt19937_64 rng(404);
  std::normal_distribution<double> unit(0.0, 1.0);
  auto fd = [&](const VectorXd& theta, double h) {
    VectorXd g(theta.size());
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      VectorXd up = theta, down = theta;
      up[k] += h;
      down[k] -= h;
      g[k] = (sem::MlDiscrepancy(up, s, spec, exo).value -
              sem::MlDiscrepancy(down, s, spec, exo).value) /
             (2 * h);
    }
    return g;
  };
  double worst_steps = 0.0, worst_analytic = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    VectorXd theta = base;
    for (Eigen::Index k = 0; k < theta.size(); ++k) theta[k] += 0.3 * unit(rng);
    const VectorXd g4 = fd(theta, 1e-4), g5 = fd(theta, 1e-5);
    VectorXd analytic;
    sem::MlDiscrepancyGradient(theta, s, spec, exo, analytic);
    const double scale = std::max(g5.lpNorm<Eigen::Infinity>(), 1e-8);
    worst_steps = std::max(
        worst_steps, (g4 - g5).lpNorm<Eigen::Infinity>() / scale);
    worst_analytic = std::max(
        worst_analytic, (analytic - g5).lpNorm<Eigen::Infinity>() / scale);
  }
  const bool pass = worst_steps <= 1e-4 && worst_analytic <= 1e-5 &&
                    fits.converged > 0 && fits.worst_grad < 1e-6;
  Report(4, pass,
         Fmt("FD 1e-4 vs 1e-5 rel %.3g, analytic vs FD rel %.3g, max converged "
             "gradient %.3g",
             worst_steps, worst_analytic, fits.worst_grad));
}

void ParameterRecovery(const RecoveryStats& st) {
  const auto names = sem::ModelSpec::Default().param_names();
  int worst = st.reps;
  std::string worst_name;
  for (std::size_t k = 0; k < st.covered.size(); ++k) {
    if (st.covered[k] < worst) {
      worst = st.covered[k];
      worst_name = names[k];
    }
  }
  const bool pass = worst >= 45 && st.income_sign >= 48 && st.seconds < 60.0;
  Report(5, pass,
         "lowest 2-SE coverage " + std::to_string(worst) + "/50 (" +
             worst_name + "), income sign " + std::to_string(st.income_sign) +
             "/50, converged " + std::to_string(st.converged) + "/50, " +
             Fmt("%.2f s", st.seconds));
}

void NullEffect() {
  const auto spec = sem::ModelSpec::Default();
  int within = 0, converged = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto est = sem::FitDaily(
        SynthPanel(7100 + static_cast<std::uint64_t>(rep), 0.0), spec);
    if (!est.converged || !est.std_error) continue;
    ++converged;
    if (std::abs(est.Get("beta_eta")) <= 2.0 * *est.StdError("beta_eta")) {
      ++within;
    }
  }
  Report(6, within >= 45,
         "beta_eta within 2 SE of 0 in " + std::to_string(within) +
             "/50, converged " + std::to_string(converged) + "/50");
}

void Throughput() {
  // 3572 POIs x 28 days = 100016 POI-days.
  const auto m = MakeMicro(3572, 28, 11);
  CeiRun runs[2];
  double secs[2];
  const int threads[2] = {1, 4};
  for (int i = 0; i < 2; ++i) {
    const auto start = Clock::now();
    runs[i] = ComputeCei(m.micro.patterns.visits, m.micro.patterns.dwell,
                         m.city.pois, BucketScheme::Default(), {threads[i]});
    secs[i] = Seconds(start);
  }
  const bool same = runs[0].poi_day == runs[1].poi_day &&
                    runs[0].zcta_day == runs[1].zcta_day;
  const double n = static_cast<double>(m.micro.patterns.visits.size());
  Report(7, same && n >= 1e5 && secs[0] < 10.0 && secs[1] < 10.0,
         Fmt("%g POI-days: %.3f s on 1 thread, %.3f s on 4", n, secs[0],
             secs[1]) +
             (same ? ", identical" : ", DIFFERENT"));
}

int Cli(const std::string& args) {
  const std::string cmd = std::string(MOBEXP_CLI) + " " + args +
                          " >/dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

void EndToEnd() {
  testing_util::TempDir root;
  const std::string flags = " --seed 99 --synth-zctas 80 --synth-pois 300"
                            " --start-date 2020-04-01 --end-date 2020-04-20";
  int status = 0;
  for (const char* tag : {"a", "b"}) {
    const fs::path in = root / (std::string("in_") + tag);
    const fs::path out = root / (std::string("out_") + tag);
    status |= Cli("synth generate --output-dir " + in.string() + flags);
    status |= Cli("run --input-dir " + in.string() + " --output-dir " +
                  out.string() + flags + (tag[0] == 'a' ? " --threads 1"
                                                        : " --threads 4"));
  }
  std::size_t compared = 0, differing = 0;
  for (const char* kind : {"in_", "out_"}) {
    const fs::path a = root / (std::string(kind) + "a");
    const fs::path b = root / (std::string(kind) + "b");
    if (!fs::exists(a)) continue;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
      if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
      const fs::path other = b / fs::relative(e.path(), a);
      ++compared;
      if (!fs::exists(other) || testing_util::ReadText(e.path()) !=
                                    testing_util::ReadText(other)) {
        ++differing;
      }
    }
  }
  const bool has_report = fs::exists(root / "out_a" / "report_trends.csv") &&
                          fs::exists(root / "out_a" / pipeline::kSemSeries);
  Report(8, status == 0 && has_report && compared > 10 && differing == 0,
         std::to_string(compared) + " CSVs compared, " +
             std::to_string(differing) + " differ, exit status " +
             std::to_string(status));
}

}  // namespace
}  // namespace mobexp

int main() {
  using namespace mobexp;
  WorkedExample();
  OracleEquivalence();
  Conservation();
  const RecoveryStats recovery = Recovery(0.8, 5100);
  GradientSanity(recovery);
  ParameterRecovery(recovery);
  NullEffect();
  Throughput();
  EndToEnd();
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
