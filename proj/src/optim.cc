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

#include "mobexp/optim.h"

#include <algorithm>
#include <cmath>

namespace mobexp::optim {

std::string ToString(StopReason reason) {
  switch (reason) {
    case StopReason::kGradient: return "gradient";
    case StopReason::kRelativeImprovement: return "relative_improvement";
    case StopReason::kMaxIterations: return "max_iterations";
    case StopReason::kLineSearchFailed: return "line_search_failed";
    case StopReason::kNonFinite: return "non_finite";
  }
  return "unknown";
}

MinimizeResult MinimizeBfgs(const Objective& objective, Eigen::VectorXd x0,
                            const MinimizeOptions& options) {
  const Eigen::Index n = x0.size();
  MinimizeResult r;
  r.x = std::move(x0);
  r.grad.resize(n);
  r.f = objective(r.x, &r.grad);
  if (!std::isfinite(r.f) || !r.grad.allFinite()) {
    r.reason = StopReason::kNonFinite;
    return r;
  }

  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  Eigen::VectorXd x_new(n), g_new(n);
  for (r.iterations = 0; r.iterations < options.max_iterations;
       ++r.iterations) {
    if (r.grad.lpNorm<Eigen::Infinity>() < options.grad_tol) {
      r.reason = StopReason::kGradient;
      return r;
    }
    Eigen::VectorXd dir = -h_inv * r.grad;
    double slope = r.grad.dot(dir);
    if (!(slope < 0.0)) {
      h_inv.setIdentity();
      dir = -r.grad;
      slope = -r.grad.squaredNorm();
    }

    constexpr double kArmijo = 1e-4;
    double step = 1.0;
    double f_new = 0.0;
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      x_new = r.x + step * dir;
      f_new = objective(x_new, &g_new);
      if (std::isfinite(f_new) && g_new.allFinite() &&
          f_new <= r.f + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      // Quadratic interpolation of the step, kept within [0.1, 0.5] of it.
      double next = 0.5 * step;
      if (std::isfinite(f_new)) {
        const double denom = 2.0 * (f_new - r.f - slope * step);
        if (denom > 0.0) next = std::clamp(-slope * step * step / denom,
                                           0.1 * step, 0.5 * step);
      }
      step = next;
    }
    if (!accepted) {
      r.reason = StopReason::kLineSearchFailed;
      return r;
    }

    const Eigen::VectorXd s = x_new - r.x;
    const Eigen::VectorXd y = g_new - r.grad;
    const double sy = s.dot(y);
    const double f_prev = r.f;
    r.x = x_new;
    r.f = f_new;
    r.grad = g_new;

    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        h_inv *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = h_inv * y;
      h_inv += (rho * rho * y.dot(hy) + rho) * s * s.transpose() -
               rho * (hy * s.transpose() + s * hy.transpose());
    }

    if (r.grad.lpNorm<Eigen::Infinity>() < options.grad_tol) {
      ++r.iterations;
      r.reason = StopReason::kGradient;
      return r;
    }
    if (r.f != 0.0 &&
        std::abs(f_prev - r.f) < options.rel_f_tol * std::abs(r.f)) {
      ++r.iterations;
      r.reason = StopReason::kRelativeImprovement;
      return r;
    }
  }
  r.reason = StopReason::kMaxIterations;
  return r;
}

Eigen::VectorXd FiniteDifferenceGradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + step;
    xm[i] = x[i] - step;
    g[i] = (f(xp) - f(xm)) / (xp[i] - xm[i]);
    xp[i] = xm[i] = x[i];
  }
  return g;
}

Eigen::MatrixXd FiniteDifferenceHessian(const Objective& objective,
                                        const Eigen::VectorXd& x, double h) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd xp = x, xm = x, gp(n), gm(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + step;
    xm[i] = x[i] - step;
    objective(xp, &gp);
    objective(xm, &gm);
    hess.col(i) = (gp - gm) / (xp[i] - xm[i]);
    xp[i] = xm[i] = x[i];
  }
  return 0.5 * (hess + hess.transpose());
}

}  // namespace mobexp::optim
