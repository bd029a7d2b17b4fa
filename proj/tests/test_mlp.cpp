#include "iot/mlp.hpp"

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace iot {
namespace {

using testing::central_difference;
using testing::max_rel_error;
using testing::random_vector;

MlpParams identity_net(Eigen::Index d, Activation act = Activation::identity) {
  MlpParams p{{{d, d, act, 0.0}}, {{Mat::Identity(d, d), Vec::Zero(d)}}};
  return p;
}

TEST(MlpInit, WeightsWithinFanInBound) {
  Rng rng(1);
  const auto p = mlp_init({{2, 2, Activation::identity, 0.0}}, rng);
  const double bound = 1.0 / std::sqrt(2.0);
  EXPECT_LE(p.layers[0].weight.cwiseAbs().maxCoeff(), bound);
  EXPECT_LE(p.layers[0].bias.cwiseAbs().maxCoeff(), bound);
}

TEST(MlpInit, DeterministicUnderSeed) {
  const auto spec = make_spec(3, {5, 4}, 2, Activation::relu, Activation::identity);
  Rng a(9), b(9);
  const auto pa = mlp_init(spec, a), pb = mlp_init(spec, b);
  EXPECT_EQ(pa.flatten(), pb.flatten());
}

TEST(MlpInit, WeightMeanOverSeedsNearZero) {
  const int draws = 10000;
  double sum = 0.0;
  for (int s = 0; s < draws; ++s) {
    Rng rng(static_cast<std::uint64_t>(s));
    sum += mlp_init({{4, 3, Activation::relu, 0.0}}, rng).layers[0].weight(1, 2);
  }
  const double sd = (1.0 / std::sqrt(4.0)) / std::sqrt(3.0);  // uniform(-b, b)
  EXPECT_LE(std::abs(sum / draws), 3.0 * sd / std::sqrt(static_cast<double>(draws)));
}

TEST(MlpInit, RejectsInconsistentSpecs) {
  Rng rng(0);
  EXPECT_THROW(mlp_init({}, rng), std::domain_error);
  EXPECT_THROW(mlp_init({{2, 3, Activation::relu, 0.0}, {4, 1, Activation::identity, 0.0}}, rng),
               std::domain_error);
  EXPECT_THROW(mlp_init({{2, 3, Activation::log_softmax, 0.0}, {3, 1, Activation::identity, 0.0}}, rng),
               std::domain_error);
}

TEST(MlpForward, Examples) {
  const auto [out, cache] = mlp_forward(identity_net(2), Vec{{1.0, 2.0}});
  EXPECT_EQ(out, (Vec{{1.0, 2.0}}));

  const auto [ls, c2] = mlp_forward(identity_net(2, Activation::log_softmax), Vec{{0.0, 0.0}});
  EXPECT_NEAR(ls(0), -std::log(2.0), 1e-15);
  EXPECT_NEAR(ls(1), -std::log(2.0), 1e-15);

  const auto [r, c3] = mlp_forward(identity_net(2, Activation::relu), Vec{{-1.0, 3.0}});
  EXPECT_EQ(r, (Vec{{0.0, 3.0}}));

  EXPECT_THROW(mlp_forward(identity_net(2), Vec{{1.0, 2.0, 3.0}}), std::domain_error);
}

TEST(MlpForward, LogSoftmaxNormalizedAndPure) {
  Rng rng(2);
  const auto p = mlp_init(make_spec(3, {8}, 6, Activation::relu, Activation::log_softmax), rng);
  for (int i = 0; i < 50; ++i) {
    const Vec x = random_vector(rng, 3, 3.0);
    const auto [a, ca] = mlp_forward(p, x);
    const auto [b, cb] = mlp_forward(p, x);
    EXPECT_EQ(a, b);
    EXPECT_LE(std::abs(logsumexp(a)), 1e-12);
  }
}

TEST(MlpBackward, IdentityBaseCase) {
  const Vec x{{0.5, -1.5}};
  const Vec g{{2.0, 3.0}};
  const auto net = identity_net(2);
  const auto [out, cache] = mlp_forward(net, x);
  const auto back = mlp_backward(net, cache, g);
  EXPECT_EQ(Vec(back.grad_input.col(0)), g);
  EXPECT_TRUE(back.grad.layers[0].weight.isApprox(g * x.transpose()));
  EXPECT_EQ(back.grad.layers[0].bias, g);
}

TEST(MlpBackward, ZeroUpstreamGivesZero) {
  Rng rng(3);
  const auto p = mlp_init(make_spec(2, {4}, 3, Activation::relu, Activation::log_softmax), rng);
  const auto [out, cache] = mlp_forward(p, Vec{{0.2, 0.1}});
  const auto back = mlp_backward(p, cache, Vec(Vec::Zero(3)));
  EXPECT_EQ(back.grad.flatten().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(back.grad_input.cwiseAbs().maxCoeff(), 0.0);
}

TEST(MlpBackward, StaleCacheRejected) {
  Rng rng(4);
  const auto p = mlp_init(make_spec(2, {4}, 3, Activation::relu, Activation::identity), rng);
  const auto q = mlp_init(make_spec(2, {5}, 3, Activation::relu, Activation::identity), rng);
  const auto [out, cache] = mlp_forward(p, Vec{{0.2, 0.1}});
  EXPECT_THROW(mlp_backward(q, cache, Vec(Vec::Zero(3))), std::domain_error);
  EXPECT_THROW(mlp_backward(p, cache, Vec(Vec::Zero(4))), std::domain_error);
}

bool near_kink(const MlpParams& p, const Vec& x) {
  const ForwardCache c = mlp_forward(p, Mat(x));
  for (std::size_t k = 0; k < p.spec.size(); ++k) {
    const auto act = p.spec[k].activation;
    if ((act == Activation::relu || act == Activation::leaky_relu) && c.pre[k].cwiseAbs().minCoeff() < 1e-3)
      return true;
  }
  return false;
}

struct Arch {
  std::vector<LayerSpec> spec;
};

class MlpGradcheck : public ::testing::TestWithParam<int> {};

TEST_P(MlpGradcheck, MatchesCentralDifferences) {
  const int which = GetParam();
  std::vector<LayerSpec> spec;
  switch (which) {
    case 0: spec = make_spec(3, {6, 5}, 4, Activation::relu, Activation::identity); break;
    case 1: spec = make_spec(2, {7}, 5, Activation::relu, Activation::log_softmax); break;
    case 2: spec = make_spec(4, {6, 6}, 1, Activation::leaky_relu, Activation::identity, 0.2); break;
    default: spec = make_spec(3, {}, 3, Activation::identity, Activation::identity); break;
  }
  Rng rng(100 + static_cast<std::uint64_t>(which));
  int checked = 0;
  while (checked < 100) {
    MlpParams p = mlp_init(spec, rng);
    const Vec x = random_vector(rng, spec.front().in_dim);
    if (near_kink(p, x)) continue;
    const Vec g = random_vector(rng, spec.back().out_dim);
    const auto [out, cache] = mlp_forward(p, x);
    const auto back = mlp_backward(p, cache, g);

    const Vec theta = p.flatten();
    auto loss_params = [&](const Vec& t) {
      MlpParams q = p;
      q.assign(t);
      return g.dot(mlp_forward(q, x).first);
    };
    auto loss_input = [&](const Vec& xi) { return g.dot(mlp_forward(p, xi).first); };
    EXPECT_LE(max_rel_error(back.grad.flatten(), central_difference(loss_params, theta)), 1e-6);
    EXPECT_LE(max_rel_error(back.grad_input.col(0), central_difference(loss_input, x)), 1e-6);
    ++checked;
  }
}

INSTANTIATE_TEST_SUITE_P(Architectures, MlpGradcheck, ::testing::Values(0, 1, 2, 3));

TEST(MlpBatch, BatchEqualsPerSample) {
  Rng rng(8);
  const auto p = mlp_init(make_spec(2, {5}, 3, Activation::relu, Activation::log_softmax), rng);
  const Mat xs = testing::random_matrix(rng, 2, 6);
  const Mat gs = testing::random_matrix(rng, 3, 6);
  const ForwardCache batch = mlp_forward(p, xs);
  const auto back = mlp_backward(p, batch, gs);
  MlpParams summed = p.zeros_like();
  for (Eigen::Index i = 0; i < xs.cols(); ++i) {
    const auto [o, c] = mlp_forward(p, Vec(xs.col(i)));
    EXPECT_TRUE(o.isApprox(batch.output.col(i), 1e-14));
    summed += mlp_backward(p, c, Vec(gs.col(i))).grad;
  }
  EXPECT_TRUE(summed.flatten().isApprox(back.grad.flatten(), 1e-12));
}

}  // namespace
}  // namespace iot
