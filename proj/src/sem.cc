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

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "mobexp/optim.h"

namespace mobexp::sem {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Structural matrices of the model at theta.
struct Structure {
  VectorXd g;       // eta on exogenous variables
  VectorXd lambda;  // endogenous on eta: (1, beta_P, beta_T, beta_eta)
  MatrixXd b;       // endogenous on exogenous, direct paths (beta_0)
  double psi = 0.0;
  VectorXd theta_diag;
  MatrixXd gamma;  // lambda g' + b: reduced form of endogenous on exogenous
};

// Endogenous order: E, [P], [T], y.
std::size_t EndoProp(const ModelSpec&) { return 1; }
std::size_t EndoTime(const ModelSpec& s) { return s.has_prop_home() ? 2 : 1; }
std::size_t EndoY(const ModelSpec& s) { return s.n_endogenous() - 1; }

Structure Unpack(const VectorXd& theta, const ModelSpec& spec) {
  const auto nx = static_cast<Eigen::Index>(spec.n_exogenous());
  const auto ne = static_cast<Eigen::Index>(spec.n_endogenous());
  Structure st;
  st.g = VectorXd::Zero(nx);
  for (std::size_t i = 0; i < spec.n_socio(); ++i) {
    st.g[static_cast<Eigen::Index>(i)] = theta[spec.beta_socio(i)];
  }
  st.lambda = VectorXd::Zero(ne);
  st.lambda[0] = 1.0;
  if (spec.has_prop_home()) st.lambda[EndoProp(spec)] = theta[spec.beta_prop()];
  if (spec.has_time_home()) st.lambda[EndoTime(spec)] = theta[spec.beta_time()];
  st.lambda[EndoY(spec)] = theta[spec.beta_eta()];
  st.b = MatrixXd::Zero(ne, nx);
  if (spec.has_lag()) {
    st.b(EndoY(spec), spec.obs_lag()) = theta[spec.beta_lag()];
  }
  st.psi = std::exp(theta[spec.psi()]);
  st.theta_diag = VectorXd::Zero(ne);
  st.theta_diag[0] = std::exp(theta[spec.theta_cei()]);
  if (spec.has_prop_home()) {
    st.theta_diag[EndoProp(spec)] = std::exp(theta[spec.theta_prop()]);
  }
  if (spec.has_time_home()) {
    st.theta_diag[EndoTime(spec)] = std::exp(theta[spec.theta_time()]);
  }
  st.theta_diag[EndoY(spec)] = std::exp(theta[spec.theta_y()]);
  st.gamma = st.lambda * st.g.transpose() + st.b;
  return st;
}

// Covariance contribution of a change dG in the reduced form plus an extra
// endogenous-block term.
MatrixXd AssembleDerivative(const MatrixXd& d_gamma, const MatrixXd& d_endo,
                            const Structure& st, const MatrixXd& phi) {
  const auto nx = phi.rows();
  const auto ne = st.lambda.size();
  MatrixXd d = MatrixXd::Zero(nx + ne, nx + ne);
  const MatrixXd dzx = d_gamma * phi;
  d.bottomLeftCorner(ne, nx) = dzx;
  d.topRightCorner(nx, ne) = dzx.transpose();
  const MatrixXd t = dzx * st.gamma.transpose();
  d.bottomRightCorner(ne, ne) = t + t.transpose() + d_endo;
  return d;
}

VectorXd Ols(const MatrixXd& sxx, const VectorXd& sxy) {
  return sxx.ldlt().solve(sxy);
}

// Moment-based starting point in the internal parameterization.
VectorXd StartingValues(const MatrixXd& s, const ModelSpec& spec) {
  VectorXd theta = VectorXd::Zero(static_cast<Eigen::Index>(spec.n_params()));
  const auto ns = static_cast<Eigen::Index>(spec.n_socio());
  const auto e = static_cast<Eigen::Index>(spec.obs_cei());
  const auto y = static_cast<Eigen::Index>(spec.obs_y());
  const double var_e = s(e, e);
  const VectorXd beta_s =
      Ols(s.topLeftCorner(ns, ns), s.block(0, e, ns, 1));
  for (Eigen::Index i = 0; i < ns; ++i) theta[spec.beta_socio(i)] = beta_s[i];
  const double explained =
      (beta_s.transpose() * s.topLeftCorner(ns, ns) * beta_s)(0, 0);
  const double resid_e = std::max(var_e - explained, 1e-3 * var_e);
  const double psi = 0.5 * resid_e;
  const double theta_e = 0.5 * resid_e;
  const double var_eta = explained + psi;
  theta[spec.psi()] = std::log(psi);
  theta[spec.theta_cei()] = std::log(theta_e);

  auto indicator = [&](int beta_idx, int theta_idx, Eigen::Index col) {
    const double loading = s(col, e) / var_eta;
    theta[beta_idx] = loading;
    theta[theta_idx] = std::log(
        std::max(s(col, col) - loading * loading * var_eta, 0.1 * s(col, col)));
  };
  std::size_t col = spec.obs_cei() + 1;
  if (spec.has_prop_home()) {
    indicator(spec.beta_prop(), spec.theta_prop(),
              static_cast<Eigen::Index>(col++));
  }
  if (spec.has_time_home()) {
    indicator(spec.beta_time(), spec.theta_time(),
              static_cast<Eigen::Index>(col++));
  }

  // y on (y_lag, E), with the E slope corrected for E's measurement error.
  std::vector<Eigen::Index> regs;
  if (spec.has_lag()) regs.push_back(static_cast<Eigen::Index>(spec.obs_lag()));
  regs.push_back(e);
  const auto k = static_cast<Eigen::Index>(regs.size());
  MatrixXd sxx(k, k);
  VectorXd sxy(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    sxy[a] = s(regs[a], y);
    for (Eigen::Index b = 0; b < k; ++b) sxx(a, b) = s(regs[a], regs[b]);
  }
  const VectorXd coef = Ols(sxx, sxy);
  const double resid_y = s(y, y) - coef.dot(sxy);
  if (spec.has_lag()) theta[spec.beta_lag()] = coef[0];
  theta[spec.beta_eta()] = coef[k - 1] * var_e / var_eta;
  theta[spec.theta_y()] = std::log(std::max(resid_y, 0.1 * s(y, y)));
  return theta;
}

VectorXd Jitter(const VectorXd& start, const ModelSpec& spec,
                std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  VectorXd x = start;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (spec.is_variance(static_cast<std::size_t>(k))) {
      x[k] += 0.5 * unit(rng);
    } else {
      x[k] += 0.2 * std::max(std::abs(x[k]), 0.1) * unit(rng);
    }
  }
  return x;
}

// Newton steps on the finite-difference Hessian, used to finish a BFGS run
// that stopped on the relative-improvement test before the gradient test.
void Polish(const optim::Objective& objective, optim::MinimizeResult& r,
            const FitOptions& options) {
  for (int it = 0; it < 20; ++it) {
    if (r.grad.lpNorm<Eigen::Infinity>() < options.grad_tol) {
      r.reason = optim::StopReason::kGradient;
      return;
    }
    const MatrixXd h =
        optim::FiniteDifferenceHessian(objective, r.x, options.hessian_step);
    Eigen::LLT<MatrixXd> llt(h);
    if (llt.info() != Eigen::Success) return;
    const VectorXd step = -llt.solve(r.grad);
    double scale = 1.0;
    bool improved = false;
    VectorXd g(r.x.size());
    for (int tries = 0; tries < 30; ++tries, scale *= 0.5) {
      const VectorXd x = r.x + scale * step;
      const double f = objective(x, &g);
      if (std::isfinite(f) && f <= r.f) {
        r.x = x;
        r.f = f;
        r.grad = g;
        improved = true;
        break;
      }
    }
    if (!improved) return;
  }
  if (r.grad.lpNorm<Eigen::Infinity>() < options.grad_tol) {
    r.reason = optim::StopReason::kGradient;
  }
}

SemEstimate Unfitted(const ModelSpec& spec, std::size_t n_obs,
                     std::string why) {
  SemEstimate est;
  est.names = spec.param_names();
  est.estimate = VectorXd::Constant(
      static_cast<Eigen::Index>(spec.n_params()),
      std::numeric_limits<double>::quiet_NaN());
  est.theta = est.estimate;
  est.f_ml = std::numeric_limits<double>::quiet_NaN();
  est.grad_inf_norm = std::numeric_limits<double>::quiet_NaN();
  est.n_obs = n_obs;
  est.diagnostic = std::move(why);
  return est;
}

}  // namespace

PanelBuild BuildPanel(Date t, const std::map<ZctaId, WindowMobility>& windows,
                      const CasesSeries& cases, const Socioeconomics& socio,
                      const PanelOptions& options) {
  PanelBuild out;
  out.panel.day = t;
  for (const auto& [zcta, s] : socio) {
    auto w = windows.find(zcta);
    auto today = cases.find({zcta, t});
    auto before = cases.find({zcta, t - options.lag});
    if (w == windows.end() || today == cases.end() || before == cases.end()) {
      ++out.panel.excluded;
      continue;
    }
    PanelRow row;
    row.zcta = zcta;
    row.y = Log1pTransform(static_cast<double>(today->second));
    row.y_lag = Log1pTransform(static_cast<double>(before->second));
    row.cei_w = w->second.cei_w;
    row.prop_home_w = w->second.prop_home_w;
    row.time_home_w = w->second.time_home_w;
    row.socio = s.values;
    out.panel.rows.push_back(std::move(row));
  }
  if (out.panel.rows.size() < options.min_rows) {
    out.skipped = true;
    out.diagnostic = "only " + std::to_string(out.panel.rows.size()) +
                     " complete ZCTAs on " + t.ToString() + ", need " +
                     std::to_string(options.min_rows);
  }
  return out;
}

ModelSpec::ModelSpec(std::vector<std::string> socio_names, bool prop_home,
                     bool time_home, bool lagged_cases)
    : socio_names_(std::move(socio_names)),
      prop_(prop_home),
      time_(time_home),
      lag_(lagged_cases) {
  if (socio_names_.empty() || socio_names_.size() > kSocioCount) {
    throw ConfigError("model needs between 1 and 6 socioeconomic covariates");
  }
  for (const auto& n : socio_names_) names_.push_back("beta_S_" + n);
  auto add = [&](const char* name) {
    names_.emplace_back(name);
    return static_cast<int>(names_.size()) - 1;
  };
  if (prop_) beta_prop_ = add("beta_P");
  if (time_) beta_time_ = add("beta_T");
  if (lag_) beta_lag_ = add("beta_0");
  beta_eta_ = add("beta_eta");
  first_variance_ = names_.size();
  add("psi");
  add("theta_E");
  if (prop_) add("theta_P");
  if (time_) add("theta_T");
  add("theta_y");
}

ModelSpec ModelSpec::Default() {
  return ModelSpec({"income", "low_edu", "poor", "age65", "black", "transit"},
                   true, true, true);
}

std::vector<std::string> ModelSpec::observed_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n_socio(); ++i) {
    out.emplace_back(kSocioNames[i]);
  }
  if (lag_) out.emplace_back("y_lag");
  out.emplace_back("E");
  if (prop_) out.emplace_back("P");
  if (time_) out.emplace_back("T");
  out.emplace_back("y");
  return out;
}

Eigen::MatrixXd ModelSpec::ObservedMatrix(const Panel& panel) const {
  MatrixXd x(static_cast<Eigen::Index>(panel.rows.size()),
             static_cast<Eigen::Index>(n_observed()));
  for (std::size_t r = 0; r < panel.rows.size(); ++r) {
    const auto& row = panel.rows[r];
    Eigen::Index c = 0;
    const auto ri = static_cast<Eigen::Index>(r);
    for (std::size_t i = 0; i < n_socio(); ++i) x(ri, c++) = row.socio[i];
    if (lag_) x(ri, c++) = row.y_lag;
    x(ri, c++) = row.cei_w;
    if (prop_) x(ri, c++) = row.prop_home_w;
    if (time_) x(ri, c++) = row.time_home_w;
    x(ri, c++) = row.y;
  }
  return x;
}

Eigen::VectorXd SemParams::Natural(const ModelSpec& spec) const {
  if (beta_socio.size() != spec.n_socio()) {
    throw ConfigError("parameter vector has " +
                      std::to_string(beta_socio.size()) +
                      " socio coefficients, model has " +
                      std::to_string(spec.n_socio()));
  }
  VectorXd v(static_cast<Eigen::Index>(spec.n_params()));
  for (std::size_t i = 0; i < spec.n_socio(); ++i) {
    v[spec.beta_socio(i)] = beta_socio[i];
  }
  if (spec.has_prop_home()) v[spec.beta_prop()] = beta_prop;
  if (spec.has_time_home()) v[spec.beta_time()] = beta_time;
  if (spec.has_lag()) v[spec.beta_lag()] = beta_lag;
  v[spec.beta_eta()] = beta_eta;
  v[spec.psi()] = psi;
  v[spec.theta_cei()] = theta_cei;
  if (spec.has_prop_home()) v[spec.theta_prop()] = theta_prop;
  if (spec.has_time_home()) v[spec.theta_time()] = theta_time;
  v[spec.theta_y()] = theta_y;
  return v;
}

Eigen::VectorXd SemParams::Internal(const ModelSpec& spec) const {
  return ToInternal(Natural(spec), spec);
}

SemParams SemParams::FromInternal(const Eigen::VectorXd& theta,
                                  const ModelSpec& spec) {
  const VectorXd v = ToNatural(theta, spec);
  SemParams p;
  for (std::size_t i = 0; i < spec.n_socio(); ++i) {
    p.beta_socio.push_back(v[spec.beta_socio(i)]);
  }
  if (spec.has_prop_home()) p.beta_prop = v[spec.beta_prop()];
  if (spec.has_time_home()) p.beta_time = v[spec.beta_time()];
  if (spec.has_lag()) p.beta_lag = v[spec.beta_lag()];
  p.beta_eta = v[spec.beta_eta()];
  p.psi = v[spec.psi()];
  p.theta_cei = v[spec.theta_cei()];
  if (spec.has_prop_home()) p.theta_prop = v[spec.theta_prop()];
  if (spec.has_time_home()) p.theta_time = v[spec.theta_time()];
  p.theta_y = v[spec.theta_y()];
  return p;
}

Eigen::VectorXd ToNatural(const Eigen::VectorXd& internal,
                          const ModelSpec& spec) {
  VectorXd v = internal;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (spec.is_variance(static_cast<std::size_t>(k))) v[k] = std::exp(v[k]);
  }
  return v;
}

Eigen::VectorXd ToInternal(const Eigen::VectorXd& natural,
                           const ModelSpec& spec) {
  VectorXd v = natural;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (spec.is_variance(static_cast<std::size_t>(k))) {
      if (!(v[k] > 0.0)) {
        throw ConfigError(spec.param_names()[static_cast<std::size_t>(k)] +
                          " must be positive");
      }
      v[k] = std::log(v[k]);
    }
  }
  return v;
}

Eigen::MatrixXd SampleCovariance(const Eigen::MatrixXd& data) {
  if (data.rows() < 2) throw DataError("covariance needs at least 2 rows");
  const MatrixXd centered = data.rowwise() - data.colwise().mean();
  const MatrixXd cov = (centered.transpose() * centered) /
                      static_cast<double>(data.rows() - 1);
  return 0.5 * (cov + cov.transpose());
}

Eigen::MatrixXd ExogenousBlock(const Eigen::MatrixXd& cov,
                               const ModelSpec& spec) {
  const auto nx = static_cast<Eigen::Index>(spec.n_exogenous());
  return cov.topLeftCorner(nx, nx);
}

Eigen::MatrixXd ImpliedCovariance(const Eigen::VectorXd& theta,
                                  const ModelSpec& spec,
                                  const Eigen::MatrixXd& exo_cov) {
  const Structure st = Unpack(theta, spec);
  const auto nx = exo_cov.rows();
  const auto ne = st.lambda.size();
  MatrixXd sigma(nx + ne, nx + ne);
  sigma.topLeftCorner(nx, nx) = 0.5 * (exo_cov + exo_cov.transpose());
  const MatrixXd zx = st.gamma * exo_cov;
  sigma.bottomLeftCorner(ne, nx) = zx;
  sigma.topRightCorner(nx, ne) = zx.transpose();
  MatrixXd zz = zx * st.gamma.transpose() +
                st.psi * st.lambda * st.lambda.transpose();
  zz.diagonal() += st.theta_diag;
  // Exact symmetry regardless of rounding in the products above.
  sigma.bottomRightCorner(ne, ne) = 0.5 * (zz + zz.transpose());
  return sigma;
}

std::vector<Eigen::MatrixXd> ImpliedCovarianceJacobian(
    const Eigen::VectorXd& theta, const ModelSpec& spec,
    const Eigen::MatrixXd& exo_cov) {
  const Structure st = Unpack(theta, spec);
  const auto nx = exo_cov.rows();
  const auto ne = st.lambda.size();
  const MatrixXd no_gamma = MatrixXd::Zero(ne, nx);
  const MatrixXd no_endo = MatrixXd::Zero(ne, ne);
  std::vector<MatrixXd> out(spec.n_params());

  for (std::size_t i = 0; i < spec.n_socio(); ++i) {
    MatrixXd dg = MatrixXd::Zero(ne, nx);
    dg.col(static_cast<Eigen::Index>(i)) = st.lambda;
    out[static_cast<std::size_t>(spec.beta_socio(i))] =
        AssembleDerivative(dg, no_endo, st, exo_cov);
  }
  auto loading = [&](int param, std::size_t endo) {
    const auto m = static_cast<Eigen::Index>(endo);
    MatrixXd dg = MatrixXd::Zero(ne, nx);
    dg.row(m) = st.g.transpose();
    MatrixXd dl = MatrixXd::Zero(ne, ne);
    dl.row(m) += st.psi * st.lambda.transpose();
    dl.col(m) += st.psi * st.lambda;
    out[static_cast<std::size_t>(param)] = AssembleDerivative(dg, dl, st, exo_cov);
  };
  if (spec.has_prop_home()) loading(spec.beta_prop(), EndoProp(spec));
  if (spec.has_time_home()) loading(spec.beta_time(), EndoTime(spec));
  loading(spec.beta_eta(), EndoY(spec));
  if (spec.has_lag()) {
    MatrixXd dg = MatrixXd::Zero(ne, nx);
    dg(EndoY(spec), spec.obs_lag()) = 1.0;
    out[static_cast<std::size_t>(spec.beta_lag())] =
        AssembleDerivative(dg, no_endo, st, exo_cov);
  }
  out[static_cast<std::size_t>(spec.psi())] = AssembleDerivative(
      no_gamma, st.psi * st.lambda * st.lambda.transpose(), st, exo_cov);
  auto error_var = [&](int param, std::size_t endo) {
    MatrixXd dl = MatrixXd::Zero(ne, ne);
    const auto m = static_cast<Eigen::Index>(endo);
    dl(m, m) = st.theta_diag[m];
    out[static_cast<std::size_t>(param)] =
        AssembleDerivative(no_gamma, dl, st, exo_cov);
  };
  error_var(spec.theta_cei(), 0);
  if (spec.has_prop_home()) error_var(spec.theta_prop(), EndoProp(spec));
  if (spec.has_time_home()) error_var(spec.theta_time(), EndoTime(spec));
  error_var(spec.theta_y(), EndoY(spec));
  return out;
}

namespace {

void RequirePositiveDefinite(const MatrixXd& sample_cov) {
  Eigen::LLT<MatrixXd> llt(sample_cov);
  if (llt.info() != Eigen::Success) {
    throw DataError("sample covariance is not positive definite");
  }
}

Discrepancy Evaluate(const VectorXd& theta, const MatrixXd& sample_cov,
                     const ModelSpec& spec,
                     const MatrixXd& exo_cov, VectorXd* grad) {
  const MatrixXd sigma = ImpliedCovariance(theta, spec, exo_cov);
  Eigen::LLT<MatrixXd> llt(sigma);
  Discrepancy d;
  if (!sigma.allFinite() || llt.info() != Eigen::Success) {
    d.value = kSingularPenalty;
    d.singular = true;
    if (grad != nullptr) grad->setZero(theta.size());
    return d;
  }
  const MatrixXd sigma_inv =
      llt.solve(MatrixXd::Identity(sigma.rows(), sigma.cols()));
  // F = sum over eigenvalues l of L^-1 S L^-T of (l - 1 - ln l), each term
  // nonnegative, which keeps F >= 0 even for ill-conditioned S.
  const MatrixXd l_inv_s = llt.matrixL().solve(sample_cov);
  MatrixXd m = llt.matrixL().solve(l_inv_s.transpose());
  m = 0.5 * (m + m.transpose());
  const VectorXd lambda =
      Eigen::SelfAdjointEigenSolver<MatrixXd>(m, Eigen::EigenvaluesOnly)
          .eigenvalues();
  d.value = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double u = lambda[i] - 1.0;
    d.value += lambda[i] > 0.0 ? std::max(0.0, u - std::log1p(u))
                               : kSingularPenalty;
  }
  if (grad != nullptr) {
    const MatrixXd w = sigma_inv - sigma_inv * sample_cov * sigma_inv;
    const auto jac = ImpliedCovarianceJacobian(theta, spec, exo_cov);
    grad->resize(theta.size());
    for (std::size_t k = 0; k < jac.size(); ++k) {
      (*grad)[static_cast<Eigen::Index>(k)] = w.cwiseProduct(jac[k]).sum();
    }
  }
  return d;
}

}  // namespace

Discrepancy MlDiscrepancy(const Eigen::VectorXd& theta,
                          const Eigen::MatrixXd& sample_cov,
                          const ModelSpec& spec,
                          const Eigen::MatrixXd& exo_cov) {
  RequirePositiveDefinite(sample_cov);
  return Evaluate(theta, sample_cov, spec, exo_cov, nullptr);
}

Discrepancy MlDiscrepancyGradient(const Eigen::VectorXd& theta,
                                  const Eigen::MatrixXd& sample_cov,
                                  const ModelSpec& spec,
                                  const Eigen::MatrixXd& exo_cov,
                                  Eigen::VectorXd& grad) {
  RequirePositiveDefinite(sample_cov);
  return Evaluate(theta, sample_cov, spec, exo_cov, &grad);
}

double SemEstimate::Get(const std::string& name) const {
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] == name) return estimate[static_cast<Eigen::Index>(k)];
  }
  throw std::out_of_range("no parameter named " + name);
}

std::optional<double> SemEstimate::StdError(const std::string& name) const {
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] == name) {
      if (!std_error) return std::nullopt;
      return (*std_error)[static_cast<Eigen::Index>(k)];
    }
  }
  throw std::out_of_range("no parameter named " + name);
}

SemEstimate FitCovariance(const Eigen::MatrixXd& sample_cov,
                          std::size_t n_obs, const ModelSpec& spec,
                          const FitOptions& options) {
  if (sample_cov.rows() != static_cast<Eigen::Index>(spec.n_observed()) ||
      sample_cov.cols() != sample_cov.rows()) {
    throw ConfigError("sample covariance does not match the model's " +
                      std::to_string(spec.n_observed()) + " observed variables");
  }
  try {
    RequirePositiveDefinite(sample_cov);
  } catch (const DataError& e) {
    return Unfitted(spec, n_obs, e.what());
  }
  const MatrixXd exo = ExogenousBlock(sample_cov, spec);
  const optim::Objective objective = [&](const VectorXd& x, VectorXd* g) {
    return Evaluate(x, sample_cov, spec, exo, g).value;
  };

  const VectorXd start = StartingValues(sample_cov, spec);
  std::mt19937_64 rng(options.seed);
  const optim::MinimizeOptions mopts{options.grad_tol, options.rel_f_tol,
                                     options.max_iterations};
  // A fit counts as converged only once the gradient test passes.
  auto done = [&](const optim::MinimizeResult& r) {
    return r.converged() &&
           r.grad.lpNorm<Eigen::Infinity>() < options.grad_tol;
  };
  optim::MinimizeResult best;
  bool have_best = false;
  int attempt = 0;
  for (; attempt <= options.max_restarts; ++attempt) {
    const VectorXd x0 = attempt == 0 ? start : Jitter(start, spec, rng);
    auto r = optim::MinimizeBfgs(objective, x0, mopts);
    if (r.converged()) Polish(objective, r, options);
    const bool better = !have_best || (done(r) && !done(best)) ||
                        (done(r) == done(best) && r.f < best.f);
    if (better && std::isfinite(r.f)) {
      best = std::move(r);
      have_best = true;
    }
    if (have_best && done(best)) break;
  }
  if (!have_best) return Unfitted(spec, n_obs, "objective not finite");

  SemEstimate est;
  est.names = spec.param_names();
  est.theta = best.x;
  est.estimate = ToNatural(best.x, spec);
  est.f_ml = best.f;
  est.grad_inf_norm = best.grad.lpNorm<Eigen::Infinity>();
  est.converged = done(best);
  est.n_obs = n_obs;
  est.iterations = best.iterations;
  est.restarts = std::min(attempt, options.max_restarts);
  est.diagnostic = optim::ToString(best.reason);
  if (best.converged() && !est.converged) {
    est.diagnostic += "; gradient above tolerance";
  }
  if (!est.converged) return est;

  const MatrixXd hess =
      optim::FiniteDifferenceHessian(objective, best.x, options.hessian_step);
  Eigen::LLT<MatrixXd> llt(hess);
  if (llt.info() != Eigen::Success || n_obs < 2) {
    est.diagnostic += "; Hessian not positive definite, no standard errors";
    return est;
  }
  const MatrixXd cov =
      (2.0 / static_cast<double>(n_obs - 1)) *
      llt.solve(MatrixXd::Identity(hess.rows(), hess.cols()));
  VectorXd se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  for (Eigen::Index k = 0; k < se.size(); ++k) {
    if (spec.is_variance(static_cast<std::size_t>(k))) se[k] *= est.estimate[k];
  }
  est.std_error = std::move(se);
  return est;
}

SemEstimate FitDaily(const Panel& panel, const ModelSpec& spec,
                     const FitOptions& options) {
  SemEstimate est;
  if (panel.rows.size() < options.min_rows) {
    est = Unfitted(spec, panel.rows.size(),
                   "only " + std::to_string(panel.rows.size()) +
                       " rows, need " + std::to_string(options.min_rows));
  } else {
    est = FitCovariance(SampleCovariance(spec.ObservedMatrix(panel)),
                        panel.rows.size(), spec, options);
  }
  est.day = panel.day;
  return est;
}

std::vector<std::pair<Date, double>> RunwiseMovingAverage7(
    std::span<const std::pair<Date, double>> series) {
  std::vector<std::pair<Date, double>> out;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= series.size(); ++i) {
    if (i == series.size() || series[i].first != series[i - 1].first + 1) {
      auto run = MovingAverage7(series.subspan(begin, i - begin));
      out.insert(out.end(), run.begin(), run.end());
      begin = i;
    }
  }
  return out;
}

SemSeries FitSeries(std::span<const PanelBuild> panels, const ModelSpec& spec,
                    const FitOptions& options, int threads) {
  for (std::size_t i = 1; i < panels.size(); ++i) {
    if (!(panels[i - 1].panel.day < panels[i].panel.day)) {
      throw ConfigError("panels must be in ascending date order");
    }
  }
  SemSeries series;
  series.days.resize(panels.size());
  ParallelFor(panels.size(), threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      auto& entry = series.days[i];
      entry.day = panels[i].panel.day;
      if (panels[i].skipped) {
        entry.gap_reason = panels[i].diagnostic;
        continue;
      }
      FitOptions day_options = options;
      day_options.seed = options.seed + i;
      entry.estimate = FitDaily(panels[i].panel, spec, day_options);
    }
  });

  std::vector<std::pair<Date, double>> income, exposure;
  const std::string income_name = spec.param_names()[0];
  for (const auto& d : series.days) {
    if (!d.estimate || !d.estimate->converged) continue;
    income.emplace_back(d.day, d.estimate->Get(income_name));
    exposure.emplace_back(d.day, d.estimate->Get("beta_eta"));
  }
  series.income_effect_ma7 = RunwiseMovingAverage7(income);
  series.exposure_effect_ma7 = RunwiseMovingAverage7(exposure);
  return series;
}

}  // namespace mobexp::sem
