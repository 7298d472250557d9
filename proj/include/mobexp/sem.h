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

#ifndef MOBEXP_SEM_H_
#define MOBEXP_SEM_H_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mobexp/core.h"
#include "mobexp/distancing.h"
#include "mobexp/ingest.h"

namespace mobexp::sem {

// Daily structural equations model, one cross-section of ZCTAs per day t:
//
//   eta = beta_S' S + zeta                         var(zeta) = psi
//   E   = 1 * eta + eps_E                          var = theta_E
//   P   = beta_P * eta + eps_P                     var = theta_P
//   T   = beta_T * eta + eps_T                     var = theta_T
//   y   = beta_0 * y_lag + beta_eta * eta + eps_y  var = theta_y
//
// S (socioeconomics) and y_lag are exogenous and their covariance block is
// held at its sample value. E, P, T are the windowed mobility measures and y
// the transformed new cases. Intercepts and the day effect vanish under
// per-day mean centering. Internally variances are carried as logs.

struct PanelRow {
  ZctaId zcta;
  double y = 0.0;
  double y_lag = 0.0;
  double cei_w = 0.0;
  double prop_home_w = 0.0;
  double time_home_w = 0.0;
  std::array<double, kSocioCount> socio{};
};

struct Panel {
  Date day;
  std::vector<PanelRow> rows;
  std::size_t excluded = 0;  // ZCTAs dropped for incomplete data
};

struct PanelOptions {
  std::size_t min_rows = 30;
  int lag = 1;  // days between y and y_lag
};

struct PanelBuild {
  Panel panel;
  bool skipped = false;
  std::string diagnostic;
};

// One row per ZCTA of `socio` that has a mobility window at t and case
// counts on t and t - lag. y and y_lag are log1p-transformed. A day with
// fewer than min_rows complete rows is marked skipped.
PanelBuild BuildPanel(Date t, const std::map<ZctaId, WindowMobility>& windows,
                      const CasesSeries& cases, const Socioeconomics& socio,
                      const PanelOptions& options = {});

// Which observed variables enter the model. The full model has six socio
// covariates, P, T and y_lag (15 free parameters); smaller variants exist
// for testing.
class ModelSpec {
 public:
  ModelSpec(std::vector<std::string> socio_names, bool prop_home,
            bool time_home, bool lagged_cases);
  static ModelSpec Default();

  std::size_t n_socio() const { return socio_names_.size(); }
  std::size_t n_exogenous() const { return n_socio() + (lag_ ? 1 : 0); }
  std::size_t n_endogenous() const { return 2 + (prop_ ? 1 : 0) + (time_ ? 1 : 0); }
  std::size_t n_observed() const { return n_exogenous() + n_endogenous(); }
  std::size_t n_params() const { return names_.size(); }
  bool has_prop_home() const { return prop_; }
  bool has_time_home() const { return time_; }
  bool has_lag() const { return lag_; }

  const std::vector<std::string>& param_names() const { return names_; }
  std::vector<std::string> observed_names() const;
  bool is_variance(std::size_t k) const { return k >= first_variance_; }

  // Parameter indices; -1 when the term is not in the model.
  int beta_socio(std::size_t i) const { return static_cast<int>(i); }
  int beta_prop() const { return beta_prop_; }
  int beta_time() const { return beta_time_; }
  int beta_lag() const { return beta_lag_; }
  int beta_eta() const { return beta_eta_; }
  int psi() const { return static_cast<int>(first_variance_); }
  int theta_cei() const { return psi() + 1; }
  int theta_prop() const { return prop_ ? psi() + 2 : -1; }
  int theta_time() const { return time_ ? psi() + 2 + (prop_ ? 1 : 0) : -1; }
  int theta_y() const { return static_cast<int>(n_params()) - 1; }

  // Observed-variable indices.
  std::size_t obs_lag() const { return n_socio(); }
  std::size_t obs_cei() const { return n_exogenous(); }
  std::size_t obs_y() const { return n_observed() - 1; }

  // N x p matrix of the panel's observed variables in model order.
  Eigen::MatrixXd ObservedMatrix(const Panel& panel) const;

 private:
  std::vector<std::string> socio_names_;
  bool prop_, time_, lag_;
  std::vector<std::string> names_;
  std::size_t first_variance_ = 0;
  int beta_prop_ = -1, beta_time_ = -1, beta_lag_ = -1, beta_eta_ = -1;
};

// Natural-scale parameters. Converts to and from the internal vector where
// variances are logged.
struct SemParams {
  std::vector<double> beta_socio;
  double beta_prop = 0.0;
  double beta_time = 0.0;
  double beta_lag = 0.0;
  double beta_eta = 0.0;
  double psi = 1.0;
  double theta_cei = 1.0;
  double theta_prop = 1.0;
  double theta_time = 1.0;
  double theta_y = 1.0;

  Eigen::VectorXd Natural(const ModelSpec& spec) const;
  Eigen::VectorXd Internal(const ModelSpec& spec) const;
  static SemParams FromInternal(const Eigen::VectorXd& theta,
                                const ModelSpec& spec);
};

Eigen::VectorXd ToNatural(const Eigen::VectorXd& internal,
                          const ModelSpec& spec);
Eigen::VectorXd ToInternal(const Eigen::VectorXd& natural,
                           const ModelSpec& spec);

// Sample covariance (divisor N - 1) of mean-centered columns.
Eigen::MatrixXd SampleCovariance(const Eigen::MatrixXd& data);

// Leading n_exogenous x n_exogenous block.
Eigen::MatrixXd ExogenousBlock(const Eigen::MatrixXd& cov,
                               const ModelSpec& spec);

// Model-implied covariance of the observed variables.
Eigen::MatrixXd ImpliedCovariance(const Eigen::VectorXd& theta,
                                  const ModelSpec& spec,
                                  const Eigen::MatrixXd& exo_cov);

// d Sigma / d theta_k for every internal parameter k.
std::vector<Eigen::MatrixXd> ImpliedCovarianceJacobian(
    const Eigen::VectorXd& theta, const ModelSpec& spec,
    const Eigen::MatrixXd& exo_cov);

inline constexpr double kSingularPenalty = 1e10;

struct Discrepancy {
  double value = 0.0;
  bool singular = false;  // Sigma(theta) not positive definite
};

// F = ln|Sigma| + tr(S Sigma^-1) - ln|S| - p. A non-positive-definite
// Sigma(theta) yields kSingularPenalty with `singular` set. Throws DataError
// when sample_cov is not positive definite.
Discrepancy MlDiscrepancy(const Eigen::VectorXd& theta,
                          const Eigen::MatrixXd& sample_cov,
                          const ModelSpec& spec, const Eigen::MatrixXd& exo_cov);

// Analytic gradient of F: dF/dtheta_k = tr[(Sigma^-1 - Sigma^-1 S Sigma^-1)
// dSigma/dtheta_k]. Returns F as well; gradient is zero when singular.
Discrepancy MlDiscrepancyGradient(const Eigen::VectorXd& theta,
                                  const Eigen::MatrixXd& sample_cov,
                                  const ModelSpec& spec,
                                  const Eigen::MatrixXd& exo_cov,
                                  Eigen::VectorXd& grad);

struct FitOptions {
  double grad_tol = 1e-6;
  double rel_f_tol = 1e-10;
  int max_iterations = 500;
  int max_restarts = 3;
  double hessian_step = 1e-4;  // relative central-difference step
  std::size_t min_rows = 30;
  std::uint64_t seed = 0;  // jitter stream for restarts
};

struct SemEstimate {
  Date day;
  std::vector<std::string> names;
  Eigen::VectorXd estimate;  // natural scale
  std::optional<Eigen::VectorXd> std_error;  // natural scale
  Eigen::VectorXd theta;  // internal parameterization at the optimum
  double f_ml = 0.0;
  double grad_inf_norm = 0.0;
  bool converged = false;
  std::size_t n_obs = 0;
  int iterations = 0;
  int restarts = 0;
  std::string diagnostic;

  // Natural-scale estimate of a named parameter; throws std::out_of_range.
  double Get(const std::string& name) const;
  std::optional<double> StdError(const std::string& name) const;
};

// Fits from a sample covariance of `n_obs` rows. Standard errors are
// sqrt(diag(2/(N-1) H^-1)) with H the finite-difference Hessian of F in the
// internal parameters, mapped to natural scale by the delta method.
SemEstimate FitCovariance(const Eigen::MatrixXd& sample_cov, std::size_t n_obs,
                          const ModelSpec& spec, const FitOptions& options = {});

// Centers the panel, fits, and stamps the panel's day.
SemEstimate FitDaily(const Panel& panel, const ModelSpec& spec,
                     const FitOptions& options = {});

struct SeriesEntry {
  Date day;
  std::optional<SemEstimate> estimate;  // absent for a gap
  std::string gap_reason;
};

struct SemSeries {
  std::vector<SeriesEntry> days;  // date order
  // Trailing 7-day means over each contiguous run of fitted days.
  std::vector<std::pair<Date, double>> income_effect_ma7;
  std::vector<std::pair<Date, double>> exposure_effect_ma7;
};

// Fits every non-skipped panel, in parallel over days. Day i uses seed
// options.seed + i, so results do not depend on `threads`.
SemSeries FitSeries(std::span<const PanelBuild> panels, const ModelSpec& spec,
                    const FitOptions& options = {}, int threads = 1);

// Trailing 7-day means of a dated series, restarted after every gap.
std::vector<std::pair<Date, double>> RunwiseMovingAverage7(
    std::span<const std::pair<Date, double>> series);

}  // namespace mobexp::sem

#endif  // MOBEXP_SEM_H_
