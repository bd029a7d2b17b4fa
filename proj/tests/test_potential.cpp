#include "iot/potential.hpp"

#include <gtest/gtest.h>

#include <numbers>

#include "test_support.hpp"

namespace iot {
namespace {

using testing::central_difference;
using testing::max_rel_error;
using testing::random_matrix;
using testing::random_vector;

PotentialParams random_potential(Rng& rng, Eigen::Index n, Eigen::Index d) {
  return {random_vector(rng, n, 0.5), random_matrix(rng, d, n), random_matrix(rng, d, n, 0.4)};
}

TEST(EvalF, SingleStandardComponent) {
  const PotentialParams p{Vec::Zero(1), Mat::Zero(1, 1), Mat::Zero(1, 1)};
  EXPECT_NEAR(eval_f(p, Vec::Zero(1), 1.0), -0.918938533204673, 1e-12);
}

TEST(EvalF, DuplicateComponentsAddEpsLog2) {
  Rng rng(1);
  const Vec b = random_vector(rng, 2);
  const Vec ls = random_vector(rng, 2, 0.3);
  const PotentialParams one{Vec::Zero(1), b, ls};
  const PotentialParams two{Vec::Zero(2), b.replicate(1, 2), ls.replicate(1, 2)};
  const Vec y = random_vector(rng, 2);
  for (double eps : {0.5, 1.0, 3.0})
    EXPECT_NEAR(eval_f(two, y, eps), eval_f(one, y, eps) + eps * std::log(2.0), 1e-12);
}

TEST(EvalF, MatchesLinearDomainSum) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const PotentialParams p = random_potential(rng, 2, 2);
    const Vec y = random_vector(rng, 2);
    const double eps = 0.5 + trial * 0.1;
    double density = 0.0;
    for (int n = 0; n < 2; ++n) {
      double dens_n = std::exp(p.log_weight(n));
      for (int j = 0; j < 2; ++j) {
        const double var = eps * std::exp(p.log_scale(j, n));
        const double diff = y(j) - p.center(j, n);
        dens_n *= std::exp(-diff * diff / (2 * var)) / std::sqrt(2 * std::numbers::pi * var);
      }
      density += dens_n;
    }
    EXPECT_NEAR(eval_f(p, y, eps), eps * std::log(density), 1e-10);
  }
}

TEST(EvalF, RejectsBadEps) {
  const PotentialParams p{Vec::Zero(1), Mat::Zero(1, 1), Mat::Zero(1, 1)};
  EXPECT_THROW(eval_f(p, Vec::Zero(1), 0.0), std::domain_error);
  EXPECT_THROW(eval_f(p, Vec::Zero(1), -1.0), std::domain_error);
  EXPECT_THROW(grad_f(p, Vec::Zero(1), 0.0), std::domain_error);
  EXPECT_THROW(eval_f(p, Vec::Zero(2), 1.0), std::domain_error);
}

TEST(GradF, SingleComponentExamples) {
  Rng rng(3);
  const PotentialParams p{Vec::Constant(1, 0.3), random_matrix(rng, 2, 1), random_matrix(rng, 2, 1, 0.3)};
  const double eps = 1.7;
  const auto g = grad_f(p, random_vector(rng, 2), eps);
  EXPECT_NEAR(g.params.log_weight(0), eps, 1e-14);
  const auto at_mode = grad_f(p, p.center.col(0), eps);
  EXPECT_NEAR(at_mode.y.norm(), 0.0, 1e-14);
}

TEST(GradF, MatchesFiniteDifferences) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    PotentialParams p = random_potential(rng, 3, 2);
    const Vec y = random_vector(rng, 2);
    const double eps = 0.7 + 0.05 * trial;
    const auto g = grad_f(p, y, eps);
    auto by_params = [&](const Vec& t) {
      PotentialParams q = p;
      q.assign(t);
      return eval_f(q, y, eps);
    };
    auto by_y = [&](const Vec& yy) { return eval_f(p, yy, eps); };
    EXPECT_LE(max_rel_error(g.params.flatten(), central_difference(by_params, p.flatten())), 1e-6);
    EXPECT_LE(max_rel_error(g.y, central_difference(by_y, y)), 1e-6);
  }
}

TEST(PotentialProperties, IsolatedComponentLimit) {
  // Component 1 sits 40 sd away from component 0.
  const double eps = 1.0;
  PotentialParams p{Vec{{std::log(0.3), std::log(0.7)}}, Mat{{0.0, 40.0}, {0.0, 0.0}},
                    Mat::Zero(2, 2)};
  const Vec y = p.center.col(0);
  const double single = eps * gauss_logpdf(y, p.center.col(0), DiagPSD(Vec::Constant(2, std::log(eps))));
  EXPECT_NEAR(eval_f(p, y, eps) - single, eps * p.log_weight(0), 1e-8);
}

TEST(PotentialProperties, WeightShiftEquivariance) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    PotentialParams p = random_potential(rng, 4, 2);
    const Vec y = random_vector(rng, 2);
    const double eps = 0.5 + trial * 0.2, kappa = 0.37 * (trial - 10);
    const double base = eval_f(p, y, eps);
    p.log_weight.array() += kappa;
    EXPECT_NEAR(eval_f(p, y, eps), base + eps * kappa, 1e-12 * std::max(1.0, std::abs(base)));
  }
}

TEST(PotentialInit, FollowsInitializationScheme) {
  Rng rng(6);
  const Mat data = random_matrix(rng, 2, 30);
  const auto p = potential_init(5, data, rng);
  EXPECT_TRUE(p.log_weight.isApprox(Vec::Constant(5, std::log(1.0 / 5.0))));
  EXPECT_TRUE(p.log_scale.isApprox(Mat::Constant(2, 5, std::log(0.1))));
  for (Eigen::Index n = 0; n < 5; ++n) {
    bool found = false;
    for (Eigen::Index i = 0; i < data.cols(); ++i) found |= data.col(i) == p.center.col(n);
    EXPECT_TRUE(found);
  }
}

}  // namespace
}  // namespace iot
