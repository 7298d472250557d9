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

#include "mobexp/sem.h"

#include <cmath>
#include <numeric>
#include <random>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "mobexp/synth.h"

namespace mobexp::sem {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

ModelSpec ToySpec() { return ModelSpec({"income"}, false, false, false); }

// Toy natural vector: beta_S, beta_eta, psi, theta_E, theta_y.
VectorXd ToyNatural(double b, double be, double psi, double te, double ty) {
  VectorXd v(5);
  v << b, be, psi, te, ty;
  return v;
}

// Path-tracing oracle: all variables (exo, eta, endo) as v = A v + u, then
// Sigma_v = (I - A)^-1 Omega (I - A)^-T restricted to the observed ones.
MatrixXd OracleCovariance(const VectorXd& nat, const ModelSpec& spec,
                          const MatrixXd& exo) {
  const auto q = static_cast<Eigen::Index>(spec.n_exogenous());
  const Eigen::Index eta = q;
  const Eigen::Index first_endo = q + 1;
  const auto n_endo = static_cast<Eigen::Index>(spec.n_endogenous());
  const Eigen::Index m = first_endo + n_endo;
  MatrixXd a = MatrixXd::Zero(m, m);
  MatrixXd omega = MatrixXd::Zero(m, m);
  omega.topLeftCorner(q, q) = exo;
  for (std::size_t i = 0; i < spec.n_socio(); ++i) {
    a(eta, static_cast<Eigen::Index>(i)) = nat[spec.beta_socio(i)];
  }
  omega(eta, eta) = nat[spec.psi()];
  Eigen::Index e = first_endo;
  a(e, eta) = 1.0;
  omega(e, e) = nat[spec.theta_cei()];
  ++e;
  if (spec.has_prop_home()) {
    a(e, eta) = nat[spec.beta_prop()];
    omega(e, e) = nat[spec.theta_prop()];
    ++e;
  }
  if (spec.has_time_home()) {
    a(e, eta) = nat[spec.beta_time()];
    omega(e, e) = nat[spec.theta_time()];
    ++e;
  }
  a(e, eta) = nat[spec.beta_eta()];
  if (spec.has_lag()) a(e, q - 1) = nat[spec.beta_lag()];
  omega(e, e) = nat[spec.theta_y()];
  const MatrixXd inv = (MatrixXd::Identity(m, m) - a).inverse();
  const MatrixXd full = inv * omega * inv.transpose();
  const Eigen::Index p = q + n_endo;
  MatrixXd out(p, p);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < q; ++i) keep.push_back(i);
  for (Eigen::Index i = first_endo; i < m; ++i) keep.push_back(i);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) out(i, j) = full(keep[i], keep[j]);
  }
  return out;
}

synth::SynthConfig PanelConfig(std::uint64_t seed, std::size_t n_zcta) {
  synth::SynthConfig cfg;
  cfg.seed = seed;
  cfg.n_zcta = n_zcta;
  cfg.n_poi = 0;
  cfg.end = cfg.start;
  return cfg;
}

Panel SynthPanel(const synth::SynthConfig& cfg) {
  const auto city = synth::GenerateCity(cfg);
  return synth::GeneratePanels(cfg, city).front();
}

MatrixXd RandomSpd(std::size_t p, std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  MatrixXd x(static_cast<Eigen::Index>(3 * p), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = unit(rng);
  }
  return SampleCovariance(x);
}

TEST(ModelSpecTest, DefaultHasFifteenParameters) {
  const auto spec = ModelSpec::Default();
  EXPECT_EQ(spec.n_params(), 15u);
  EXPECT_EQ(spec.n_observed(), 11u);
  EXPECT_THAT(spec.param_names(),
              ::testing::ElementsAre(
                  "beta_S_income", "beta_S_low_edu", "beta_S_poor",
                  "beta_S_age65", "beta_S_black", "beta_S_transit", "beta_P",
                  "beta_T", "beta_0", "beta_eta", "psi", "theta_E", "theta_P",
                  "theta_T", "theta_y"));
  EXPECT_THAT(spec.observed_names(),
              ::testing::ElementsAre("income_log", "low_edu", "poor", "age65",
                                     "black", "transit", "y_lag", "E", "P",
                                     "T", "y"));
  EXPECT_THROW(ModelSpec({}, true, true, true), ConfigError);
}

TEST(SemParamsTest, InternalRoundTrip) {
  const auto spec = ModelSpec::Default();
  const auto truth = synth::SynthConfig::DefaultTruth();
  const VectorXd theta = truth.Internal(spec);
  EXPECT_NEAR(theta[spec.psi()], std::log(0.3), 1e-15);
  const auto back = SemParams::FromInternal(theta, spec);
  EXPECT_NEAR(back.psi, 0.3, 1e-15);
  EXPECT_NEAR(back.beta_eta, 0.8, 1e-15);
  EXPECT_EQ(back.beta_socio.size(), 6u);
}

TEST(ImpliedCovarianceTest, ZeroPaths) {
  const auto spec = ModelSpec::Default();
  SemParams p;
  p.beta_socio.assign(6, 0.0);
  p.psi = 1.0;
  p.theta_cei = 0.5;
  p.theta_prop = 0.25;
  p.theta_time = 0.75;
  p.theta_y = 2.0;
  std::mt19937_64 rng(3);
  const MatrixXd exo = RandomSpd(7, rng);
  const MatrixXd sigma = ImpliedCovariance(p.Internal(spec), spec, exo);
  EXPECT_TRUE(sigma.topLeftCorner(7, 7).isApprox(exo, 1e-15));
  EXPECT_NEAR(sigma(7, 7), 1.5, 1e-14);
  EXPECT_NEAR(sigma(8, 8), 0.25, 1e-14);
  EXPECT_NEAR(sigma(9, 9), 0.75, 1e-14);
  EXPECT_NEAR(sigma(10, 10), 2.0, 1e-14);
  EXPECT_EQ(sigma.block(7, 0, 4, 7).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ImpliedCovarianceTest, ToyHandDerived) {
  // S, E = eta + e, y = b_eta * eta + e_y, eta = b * S + zeta with var(S) = 2,
  // b = 0.7, b_eta = 1.3, psi = 0.4, theta_E = 0.3, theta_y = 0.5.
  const auto spec = ToySpec();
  MatrixXd exo(1, 1);
  exo << 2.0;
  const MatrixXd sigma = ImpliedCovariance(
      ToInternal(ToyNatural(0.7, 1.3, 0.4, 0.3, 0.5), spec), spec, exo);
  MatrixXd hand(3, 3);
  hand << 2.0, 1.4, 1.82,  //
      1.4, 1.68, 1.794,    //
      1.82, 1.794, 2.8322;
  EXPECT_LT((sigma - hand).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ImpliedCovarianceTest, MatchesPathTracingOracle) {
  const auto spec = ModelSpec::Default();
  std::mt19937_64 rng(11);
  std::normal_distribution<double> unit(0.0, 1.0);
  const VectorXd base = synth::SynthConfig::DefaultTruth().Internal(spec);
  for (int rep = 0; rep < 20; ++rep) {
    const MatrixXd exo = RandomSpd(7, rng);
    VectorXd theta = base;
    for (Eigen::Index k = 0; k < theta.size(); ++k) theta[k] += 0.5 * unit(rng);
    const MatrixXd sigma = ImpliedCovariance(theta, spec, exo);
    const MatrixXd oracle = OracleCovariance(ToNatural(theta, spec), spec, exo);
    EXPECT_LT((sigma - oracle).cwiseAbs().maxCoeff(),
              1e-12 * (1.0 + oracle.cwiseAbs().maxCoeff()));
    EXPECT_TRUE(sigma.allFinite());
    EXPECT_EQ((sigma - sigma.transpose()).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(ImpliedCovarianceTest, JacobianMatchesDifferences) {
  const auto spec = ModelSpec::Default();
  std::mt19937_64 rng(5);
  const MatrixXd exo = RandomSpd(7, rng);
  const VectorXd theta = synth::SynthConfig::DefaultTruth().Internal(spec);
  const auto jac = ImpliedCovarianceJacobian(theta, spec, exo);
  ASSERT_EQ(jac.size(), 15u);
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    VectorXd up = theta, down = theta;
    up[k] += h;
    down[k] -= h;
    const MatrixXd fd = (ImpliedCovariance(up, spec, exo) -
                         ImpliedCovariance(down, spec, exo)) /
                        (2 * h);
    EXPECT_LT((fd - jac[static_cast<std::size_t>(k)]).cwiseAbs().maxCoeff(),
              1e-7)
        << spec.param_names()[static_cast<std::size_t>(k)];
  }
}

TEST(MlDiscrepancyTest, ZeroAtSaturation) {
  const auto spec = ModelSpec::Default();
  std::mt19937_64 rng(2);
  const MatrixXd exo = RandomSpd(7, rng);
  const VectorXd theta = synth::SynthConfig::DefaultTruth().Internal(spec);
  const MatrixXd sigma = ImpliedCovariance(theta, spec, exo);
  const auto d = MlDiscrepancy(theta, sigma, spec, exo);
  EXPECT_FALSE(d.singular);
  EXPECT_NEAR(d.value, 0.0, 1e-12);
}

TEST(MlDiscrepancyTest, ScalarStyleValue) {
  // Diagonal toy Sigma = diag(2, 0.4 + 0.3, 0.5); S differs only in y where
  // it is twice the model value, so F = ln 1 + 2 - ln 2 - 1.
  const auto spec = ToySpec();
  MatrixXd exo(1, 1);
  exo << 2.0;
  const VectorXd theta = ToInternal(ToyNatural(0, 0, 0.4, 0.3, 0.5), spec);
  MatrixXd s = ImpliedCovariance(theta, spec, exo);
  s(2, 2) = 1.0;
  EXPECT_NEAR(MlDiscrepancy(theta, s, spec, exo).value, 0.3068528194400547,
              1e-14);
}

TEST(MlDiscrepancyTest, InvariantUnderSocioPermutation) {
  const auto spec = ModelSpec::Default();
  const Panel panel = SynthPanel(PanelConfig(8, 200));
  const MatrixXd x = spec.ObservedMatrix(panel);
  const MatrixXd s = SampleCovariance(x);
  const std::vector<int> perm = {3, 0, 5, 1, 4, 2};
  MatrixXd xp = x;
  for (int i = 0; i < 6; ++i) xp.col(i) = x.col(perm[static_cast<std::size_t>(i)]);
  const MatrixXd sp = SampleCovariance(xp);

  auto truth = synth::SynthConfig::DefaultTruth();
  const VectorXd theta = truth.Internal(spec);
  auto permuted = truth;
  for (std::size_t i = 0; i < 6; ++i) {
    permuted.beta_socio[i] = truth.beta_socio[static_cast<std::size_t>(perm[i])];
  }
  const VectorXd theta_p = permuted.Internal(spec);
  const double f = MlDiscrepancy(theta, s, spec, ExogenousBlock(s, spec)).value;
  const double fp =
      MlDiscrepancy(theta_p, sp, spec, ExogenousBlock(sp, spec)).value;
  EXPECT_NEAR(f, fp, 1e-10 * std::max(1.0, f));
}

TEST(MlDiscrepancyTest, NonnegativeAndGradientMatchesDifferences) {
  const auto spec = ModelSpec::Default();
  const Panel panel = SynthPanel(PanelConfig(21, 200));
  const MatrixXd s = SampleCovariance(spec.ObservedMatrix(panel));
  const MatrixXd exo = ExogenousBlock(s, spec);
  const VectorXd base = synth::SynthConfig::DefaultTruth().Internal(spec);
  std::mt19937_64 rng(99);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    VectorXd theta = base;
    for (Eigen::Index k = 0; k < theta.size(); ++k) theta[k] += 0.3 * unit(rng);
    VectorXd grad;
    const auto d = MlDiscrepancyGradient(theta, s, spec, exo, grad);
    ASSERT_FALSE(d.singular);
    EXPECT_GE(d.value, -1e-10);
    VectorXd dir(theta.size());
    for (Eigen::Index k = 0; k < dir.size(); ++k) dir[k] = unit(rng);
    dir.normalize();
    const double h = 1e-5;
    const double fd = (MlDiscrepancy(theta + h * dir, s, spec, exo).value -
                       MlDiscrepancy(theta - h * dir, s, spec, exo).value) /
                      (2 * h);
    const double an = grad.dot(dir);
    EXPECT_LE(std::abs(an - fd), 1e-5 * std::max(std::abs(an), 1e-3))
        << "rep " << rep;
  }
}

TEST(MlDiscrepancyTest, SingularSigmaIsPenalized) {
  const auto spec = ToySpec();
  MatrixXd exo(1, 1);
  exo << 2.0;
  const MatrixXd s = ImpliedCovariance(
      ToInternal(ToyNatural(0.7, 1.3, 0.4, 0.3, 0.5), spec), spec, exo);
  VectorXd theta = ToInternal(ToyNatural(0.7, 1.3, 0.4, 0.3, 0.5), spec);
  theta[3] = -800.0;  // theta_E underflows to 0
  theta[4] = -800.0;
  theta[2] = -800.0;
  const auto d = MlDiscrepancy(theta, s, spec, exo);
  EXPECT_TRUE(d.singular);
  EXPECT_EQ(d.value, kSingularPenalty);
  MatrixXd bad = s;
  bad.row(2) = bad.row(1);
  bad.col(2) = bad.col(1);
  EXPECT_THROW(MlDiscrepancy(theta, bad, spec, exo), DataError);
}

TEST(FitDailyTest, RecoversSynthTruth) {
  const auto spec = ModelSpec::Default();
  const auto cfg = PanelConfig(7, 200);
  const auto est = FitDaily(SynthPanel(cfg), spec);
  ASSERT_TRUE(est.converged) << est.diagnostic;
  EXPECT_LT(est.grad_inf_norm, 1e-6);
  ASSERT_TRUE(est.std_error.has_value());
  EXPECT_EQ(est.n_obs, 200u);
  const VectorXd truth = cfg.truth.Natural(spec);
  int within = 0;
  for (Eigen::Index k = 0; k < truth.size(); ++k) {
    const double se = (*est.std_error)[k];
    EXPECT_GT(se, 0.0);
    if (spec.is_variance(static_cast<std::size_t>(k))) {
      EXPECT_GT(est.estimate[k], 0.0);
    }
    if (std::abs(est.estimate[k] - truth[k]) <= 3 * se) ++within;
  }
  EXPECT_GE(within, 14);
  EXPECT_LT(est.Get("beta_S_income"), 0.0);
  EXPECT_THROW(est.Get("nope"), std::out_of_range);
}

TEST(FitDailyTest, NullExposureEffect) {
  const auto spec = ModelSpec::Default();
  auto cfg = PanelConfig(31, 200);
  cfg.truth.beta_eta = 0.0;
  const auto est = FitDaily(SynthPanel(cfg), spec);
  ASSERT_TRUE(est.converged) << est.diagnostic;
  EXPECT_LT(std::abs(est.Get("beta_eta")), 3 * *est.StdError("beta_eta"));
}

TEST(FitDailyTest, DeterministicPanelIsNearSaturated) {
  // Build error columns exactly orthogonal to the exogenous block and to each
  // other, each with sample variance 1e-6, so S equals Sigma(theta*).
  const auto spec = ModelSpec::Default();
  auto cfg = PanelConfig(17, 200);
  const auto city = synth::GenerateCity(cfg);
  Panel panel = synth::GeneratePanels(cfg, city).front();
  const auto n = static_cast<Eigen::Index>(panel.rows.size());
  std::mt19937_64 rng(4);
  std::normal_distribution<double> unit(0.0, 1.0);
  MatrixXd z(n, 13);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = panel.rows[static_cast<std::size_t>(i)];
    for (int c = 0; c < 6; ++c) z(i, c) = r.socio[static_cast<std::size_t>(c)];
    z(i, 6) = r.y_lag;
    for (int c = 7; c < 13; ++c) z(i, c) = unit(rng);
  }
  z.col(12).setOnes();
  // Ones last keeps later columns centered after the QR.
  MatrixXd cols(n, 13);
  cols.col(0) = z.col(12);
  cols.rightCols(12) = z.leftCols(12);
  const Eigen::HouseholderQR<MatrixXd> qr(cols);
  const MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, 13);
  const double sd = std::sqrt(1e-6 * static_cast<double>(n - 1));
  const auto& t = cfg.truth;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& r = panel.rows[static_cast<std::size_t>(i)];
    double eta = sd * q(i, 8);
    for (std::size_t c = 0; c < 6; ++c) eta += t.beta_socio[c] * r.socio[c];
    r.cei_w = eta + sd * q(i, 9);
    r.prop_home_w = t.beta_prop * eta + sd * q(i, 10);
    r.time_home_w = t.beta_time * eta + sd * q(i, 11);
    r.y = t.beta_lag * r.y_lag + t.beta_eta * eta + sd * q(i, 12);
  }
  const auto est = FitDaily(panel, spec);
  // With error variances of 1e-6 the gradient cannot be resolved below about
  // 1e-4 in double precision, so the flag stays false; it must say so.
  EXPECT_EQ(est.converged, est.grad_inf_norm < 1e-6) << est.diagnostic;
  ASSERT_TRUE(est.estimate.allFinite());
  EXPECT_LT(est.f_ml, 1e-3);
  EXPECT_NEAR(est.Get("beta_eta"), t.beta_eta, 1e-3);
  EXPECT_NEAR(est.Get("theta_y"), 1e-6, 1e-7);
}

TEST(FitDailyTest, CenteringAbsorbsConstants) {
  const auto spec = ModelSpec::Default();
  const Panel panel = SynthPanel(PanelConfig(13, 200));
  Panel shifted = panel;
  for (auto& r : shifted.rows) {
    r.y += 5.0;
    r.cei_w += 2.5;
    r.socio[0] += 11.0;
    r.y_lag -= 3.0;
  }
  const auto a = FitDaily(panel, spec);
  const auto b = FitDaily(shifted, spec);
  ASSERT_TRUE(a.converged && b.converged);
  for (Eigen::Index k = 0; k < a.estimate.size(); ++k) {
    EXPECT_NEAR(a.estimate[k], b.estimate[k],
                1e-6 * std::max(1.0, std::abs(a.estimate[k])));
  }
}

TEST(FitDailyTest, SmallOrSingularPanelsAreNotFitted) {
  const auto spec = ModelSpec::Default();
  Panel small = SynthPanel(PanelConfig(1, 20));
  const auto est = FitDaily(small, spec);
  EXPECT_FALSE(est.converged);
  EXPECT_FALSE(est.std_error.has_value());
  EXPECT_THAT(est.diagnostic, ::testing::HasSubstr("need 30"));

  Panel flat = SynthPanel(PanelConfig(1, 60));
  for (auto& r : flat.rows) r.socio[2] = 0.25;
  const auto singular = FitDaily(flat, spec);
  EXPECT_FALSE(singular.converged);
  EXPECT_THAT(singular.diagnostic, ::testing::HasSubstr("not positive definite"));
}

std::vector<PanelBuild> SeriesPanels(std::size_t days, std::uint64_t seed) {
  auto cfg = PanelConfig(seed, 200);
  cfg.end = cfg.start + static_cast<int>(days) - 1;
  const auto city = synth::GenerateCity(cfg);
  std::vector<PanelBuild> out;
  for (auto& p : synth::GeneratePanels(cfg, city)) {
    out.push_back({std::move(p), false, ""});
  }
  return out;
}

TEST(FitSeriesTest, TenDays) {
  const auto spec = ModelSpec::Default();
  const auto panels = SeriesPanels(10, 3);
  const auto series = FitSeries(panels, spec, {}, 2);
  ASSERT_EQ(series.days.size(), 10u);
  for (const auto& d : series.days) {
    ASSERT_TRUE(d.estimate.has_value());
    EXPECT_TRUE(d.estimate->converged);
    EXPECT_NEAR(d.estimate->Get("beta_eta"), 0.8,
                4 * *d.estimate->StdError("beta_eta"));
  }
  EXPECT_EQ(series.income_effect_ma7.size(), 10u);
  EXPECT_EQ(series.exposure_effect_ma7.size(), 10u);
  const auto single = FitSeries(panels, spec, {}, 1);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(single.days[i].estimate->estimate,
              series.days[i].estimate->estimate);
  }
}

TEST(FitSeriesTest, GapDayAndEmptyRange) {
  const auto spec = ModelSpec::Default();
  auto panels = SeriesPanels(10, 4);
  panels[4].skipped = true;
  panels[4].diagnostic = "only 12 complete ZCTAs";
  const auto series = FitSeries(panels, spec);
  std::size_t fitted = 0;
  for (const auto& d : series.days) fitted += d.estimate.has_value();
  EXPECT_EQ(fitted, 9u);
  EXPECT_FALSE(series.days[4].estimate.has_value());
  EXPECT_EQ(series.days[4].gap_reason, "only 12 complete ZCTAs");
  // The moving average restarts after the gap.
  EXPECT_EQ(series.income_effect_ma7[4].second,
            series.days[5].estimate->Get("beta_S_income"));

  EXPECT_TRUE(FitSeries({}, spec).days.empty());
  std::swap(panels[0], panels[1]);
  EXPECT_THROW(FitSeries(panels, spec), ConfigError);
}

TEST(RunwiseMovingAverageTest, RestartsAfterGap) {
  const Date d0 = Date::Parse("2020-04-01");
  const std::vector<std::pair<Date, double>> s = {
      {d0, 1}, {d0 + 1, 3}, {d0 + 3, 10}, {d0 + 4, 20}};
  const auto ma = RunwiseMovingAverage7(s);
  ASSERT_EQ(ma.size(), 4u);
  EXPECT_EQ(ma[1].second, 2.0);
  EXPECT_EQ(ma[2].second, 10.0);
  EXPECT_EQ(ma[3].second, 15.0);
}

TEST(BuildPanelTest, Examples) {
  const Date t = Date::Parse("2020-04-10");
  Socioeconomics socio;
  std::map<ZctaId, WindowMobility> windows;
  CasesSeries cases;
  for (int i = 0; i < 31; ++i) {
    const ZctaId z = "z" + std::to_string(100 + i);
    socio[z].values = {10.0, 0.1, 0.1, 0.1, 0.1, 0.1};
    windows[z] = {1.0, 0.5, 0.4, 10.0};
    cases[{z, t}] = i;
    cases[{z, t - 1}] = 0;
  }
  auto full = BuildPanel(t, windows, cases, socio);
  EXPECT_FALSE(full.skipped);
  EXPECT_EQ(full.panel.rows.size(), 31u);
  EXPECT_EQ(full.panel.rows[0].y, 0.0);
  EXPECT_EQ(full.panel.rows[0].y_lag, 0.0);
  EXPECT_EQ(full.panel.rows[3].y, std::log1p(3.0));

  windows.erase("z105");
  auto missing = BuildPanel(t, windows, cases, socio);
  EXPECT_EQ(missing.panel.rows.size(), 30u);
  EXPECT_EQ(missing.panel.excluded, 1u);
  EXPECT_FALSE(missing.skipped);

  cases.erase({"z106", t - 1});
  auto few = BuildPanel(t, windows, cases, socio);
  EXPECT_TRUE(few.skipped);
  EXPECT_EQ(few.panel.excluded, 2u);
  EXPECT_EQ(few.diagnostic, "only 29 complete ZCTAs on 2020-04-10, need 30");
}

}  // namespace
}  // namespace mobexp::sem
