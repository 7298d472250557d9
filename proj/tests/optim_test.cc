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

#include <cmath>

#include "gtest/gtest.h"

namespace mobexp::optim {
namespace {

double Rosenbrock(const Eigen::VectorXd& x, Eigen::VectorXd* g) {
  const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
  if (g != nullptr) {
    g->resize(2);
    (*g)[0] = -2.0 * a - 400.0 * x[0] * b;
    (*g)[1] = 200.0 * b;
  }
  return a * a + 100.0 * b * b;
}

TEST(BfgsTest, Rosenbrock) {
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  const MinimizeResult r = MinimizeBfgs(Rosenbrock, x0, {1e-8, 0.0, 1000});
  EXPECT_EQ(r.reason, StopReason::kGradient) << ToString(r.reason);
  EXPECT_TRUE(r.converged());
  EXPECT_NEAR(r.x[0], 1.0, 1e-6);
  EXPECT_NEAR(r.x[1], 1.0, 1e-6);
  EXPECT_LT(r.grad.lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(BfgsTest, IllConditionedQuadratic) {
  Eigen::VectorXd d(5);
  d << 1, 10, 100, 1000, 1e4;
  const Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(5, -2, 2);
  auto f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    const Eigen::VectorXd r = x - c;
    if (g) *g = d.cwiseProduct(r);
    return 0.5 * r.dot(d.cwiseProduct(r));
  };
  const auto r = MinimizeBfgs(f, Eigen::VectorXd::Zero(5), {1e-9, 0.0, 500});
  EXPECT_TRUE(r.converged());
  EXPECT_LT((r.x - c).norm(), 1e-8);
}

TEST(BfgsTest, IterationCapIsNotConvergence) {
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  const auto r = MinimizeBfgs(Rosenbrock, x0, {1e-12, 0.0, 3});
  EXPECT_EQ(r.reason, StopReason::kMaxIterations);
  EXPECT_FALSE(r.converged());
  EXPECT_EQ(r.iterations, 3);
}

TEST(BfgsTest, NonFiniteStart) {
  auto f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g) *g = Eigen::VectorXd::Zero(x.size());
    return std::nan("");
  };
  const auto r = MinimizeBfgs(f, Eigen::VectorXd::Zero(2));
  EXPECT_EQ(r.reason, StopReason::kNonFinite);
  EXPECT_FALSE(r.converged());
}

TEST(FiniteDifferenceTest, GradientAndHessian) {
  Eigen::VectorXd x(2);
  x << 0.3, -0.7;
  Eigen::VectorXd g;
  Rosenbrock(x, &g);
  const auto fd = FiniteDifferenceGradient(
      [](const Eigen::VectorXd& v) { return Rosenbrock(v, nullptr); }, x, 1e-5);
  EXPECT_LT((fd - g).norm(), 1e-6 * g.norm());

  const Eigen::MatrixXd h = FiniteDifferenceHessian(Rosenbrock, x, 1e-5);
  Eigen::MatrixXd exact(2, 2);
  exact << 2 - 400 * (x[1] - 3 * x[0] * x[0]), -400 * x[0], -400 * x[0], 200;
  EXPECT_LT((h - exact).norm(), 1e-5 * exact.norm());
  EXPECT_EQ(h(0, 1), h(1, 0));
}

}  // namespace
}  // namespace mobexp::optim
