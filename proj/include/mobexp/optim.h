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

#ifndef MOBEXP_OPTIM_H_
#define MOBEXP_OPTIM_H_

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace mobexp::optim {

// Returns f(x); fills *grad when grad is non-null. May return +inf or NaN
// outside the feasible region, which the line search treats as a failed step.
using Objective =
    std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct MinimizeOptions {
  double grad_tol = 1e-6;    // on the infinity norm of the gradient
  double rel_f_tol = 1e-10;  // on |f_prev - f| / |f| across an iteration
  int max_iterations = 500;
};

enum class StopReason {
  kGradient,
  kRelativeImprovement,
  kMaxIterations,
  kLineSearchFailed,
  kNonFinite,
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd grad;
  int iterations = 0;
  StopReason reason = StopReason::kMaxIterations;
  // True only for kGradient and kRelativeImprovement.
  bool converged() const {
    return reason == StopReason::kGradient ||
           reason == StopReason::kRelativeImprovement;
  }
};

std::string ToString(StopReason reason);

// BFGS on the inverse Hessian with a backtracking Armijo line search. The
// update is skipped when the curvature condition s'y > 0 fails.
MinimizeResult MinimizeBfgs(const Objective& objective, Eigen::VectorXd x0,
                            const MinimizeOptions& options = {});

// Central-difference gradient with per-coordinate step h * max(1, |x_i|).
Eigen::VectorXd FiniteDifferenceGradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h);

// Central differences of an analytic gradient, symmetrized.
Eigen::MatrixXd FiniteDifferenceHessian(const Objective& objective,
                                        const Eigen::VectorXd& x, double h);

}  // namespace mobexp::optim

#endif  // MOBEXP_OPTIM_H_
