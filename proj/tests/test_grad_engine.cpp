#include "support.hpp"

#include "msinr/error.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace msinr;
using namespace msinr::testing;

namespace {

double post_loss(const Network& net, const Eigen::VectorXd& theta, const Mask& mask, const Signal& s,
                 double lr, std::size_t steps) {
  Eigen::VectorXd t = theta;
  const Eigen::VectorXd gate = mask.update_gate();
  for (std::size_t k = 0; k < steps; ++k) t -= lr * grad(net, t, mask, s).cwiseProduct(gate);
  return forward_loss(net, t, mask, s).value;
}

}  // namespace

TEST(ForwardLoss, ZeroNetworkGivesTargetEnergy) {
  Rng rng(1);
  ArchSpec a;
  a.width = 8;
  a.hidden_layers = 2;
  ParamVector p = init(a);
  p.values.setZero();
  const Signal s = random_signal(rng, 2, 3, 20);
  const auto l = forward_loss(build_network(a), p.values, full_mask(a), s);
  EXPECT_NEAR(l.value, s.targets.squaredNorm(), 1e-12);
  EXPECT_EQ(l.count, 20u);
}

TEST(ForwardLoss, LinearOneParam) {
  const auto net = linear1();
  const auto l = forward_loss(net, Eigen::VectorXd::Constant(1, 3.0), Mask::dense(1), point_signal(1, 0));
  EXPECT_DOUBLE_EQ(l.value, 9.0);
  EXPECT_EQ(l.count, 1u);
}

TEST(ForwardLoss, ZeroedPrunedSlotsMatchAllOnesMask) {
  Rng rng(2);
  const ArchSpec a = random_arch(rng, ArchKind::siren, 200);
  const auto net = build_network(a);
  const Mask m = random_mask(rng, a, 0.6);
  Eigen::VectorXd p = random_params(rng, a).values;
  zero_pruned(m, p);
  const Signal s = random_signal(rng, a.in_dim, a.out_dim, 10);
  EXPECT_EQ(forward_loss(net, p, m, s).value, forward_loss(net, p, full_mask(a), s).value);
}

TEST(ForwardLoss, DimensionMismatchThrows) {
  Rng rng(3);
  ArchSpec a;
  a.width = 4;
  a.hidden_layers = 1;
  const auto net = build_network(a);
  const Signal s = random_signal(rng, 2, 3, 5);
  EXPECT_THROW(forward_loss(net, Eigen::VectorXd::Zero(3), full_mask(a), s), DimensionError);
  const Signal wrong_out = random_signal(rng, 2, 2, 5);
  EXPECT_THROW(forward_loss(net, init(a).values, full_mask(a), wrong_out), DimensionError);
  const Signal wrong_in = random_signal(rng, 3, 3, 5);
  EXPECT_THROW(forward_loss(net, init(a).values, full_mask(a), wrong_in), DimensionError);
}

TEST(ForwardLoss, NonFiniteIsAnError) {
  ArchSpec a;
  a.width = 4;
  a.hidden_layers = 1;
  const auto net = build_network(a);
  Eigen::VectorXd p = init(a).values;
  p[0] = std::numeric_limits<double>::quiet_NaN();
  Rng rng(4);
  EXPECT_THROW(forward_loss(net, p, full_mask(a), random_signal(rng, 2, 3, 5)), NumericalError);
}

TEST(Grad, LinearOneParam) {
  const auto g = grad(linear1(), Eigen::VectorXd::Constant(1, 3.0), Mask::dense(1), point_signal(1, 0));
  EXPECT_DOUBLE_EQ(g[0], 6.0);
}

TEST(Grad, PrunedEntriesAreExactlyZero) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto kind = trial % 2 ? ArchKind::ffn : ArchKind::siren;
    const ArchSpec a = random_arch(rng, kind, 300);
    const Mask m = random_mask(rng, a, 0.5);
    const Eigen::VectorXd p = random_params(rng, a).values;  // pruned slots deliberately nonzero
    const Signal s = random_signal(rng, a.in_dim, a.out_dim, 6);
    const auto g = grad(build_network(a), p, m, s);
    const Eigen::VectorXd gate = m.update_gate();
    for (Eigen::Index i = 0; i < g.size(); ++i)
      if (gate[i] == 0.0) EXPECT_EQ(g[i], 0.0);
  }
}

TEST(Grad, MatchesCentralDifferencesSiren) {
  Rng rng(6);
  for (int trial = 0; trial < 15; ++trial) {
    const ArchSpec a = random_arch(rng, ArchKind::siren, 200);
    const auto net = build_network(a);
    const Mask m = random_mask(rng, a);
    const Eigen::VectorXd p = random_params(rng, a).values;
    const Signal s = random_signal(rng, a.in_dim, a.out_dim, 8);
    const auto fd = central_diff([&](const Eigen::VectorXd& x) { return forward_loss(net, x, m, s).value; }, p, m);
    EXPECT_LE(rel_error(grad(net, p, m, s), fd), 1e-6) << "trial " << trial;
  }
}

TEST(Grad, MatchesCentralDifferencesFfn) {
  Rng rng(7);
  for (int trial = 0; trial < 15; ++trial) {
    const ArchSpec a = random_arch(rng, ArchKind::ffn, 300);
    const auto net = build_network(a);
    const Mask m = random_mask(rng, a);
    const Eigen::VectorXd p = random_params(rng, a).values;
    const Signal s = random_signal(rng, a.in_dim, a.out_dim, 8);
    const auto fd = central_diff([&](const Eigen::VectorXd& x) { return forward_loss(net, x, m, s).value; }, p, m);
    EXPECT_LE(rel_error(grad(net, p, m, s), fd), 1e-6) << "trial " << trial;
  }
}

TEST(Grad, LinearInSignals) {
  Rng rng(8);
  const ArchSpec a = random_arch(rng, ArchKind::siren, 200);
  const auto net = build_network(a);
  const Mask m = random_mask(rng, a);
  const Eigen::VectorXd p = random_params(rng, a).values;
  const Signal s1 = random_signal(rng, a.in_dim, a.out_dim, 5);
  const Signal s2 = random_signal(rng, a.in_dim, a.out_dim, 7);
  Signal both = s1;
  both.coords.conservativeResize(Eigen::NoChange, 12);
  both.targets.conservativeResize(Eigen::NoChange, 12);
  both.coords.rightCols(7) = s2.coords;
  both.targets.rightCols(7) = s2.targets;
  const Eigen::VectorXd sum = grad(net, p, m, s1) + grad(net, p, m, s2);
  EXPECT_LE(rel_error(grad(net, p, m, both), sum), 1e-12);
}

TEST(Grad, SinglePrecisionTracksDouble) {
  Rng rng(9);
  ArchSpec a;
  a.width = 16;
  a.hidden_layers = 2;
  a.seed = 3;
  const auto net = build_network(a);
  const Signal s = random_signal(rng, 2, 3, 64);
  const auto p = init(a).values;
  EXPECT_LE(rel_error(grad(net, p, full_mask(a), s, Precision::f32), grad(net, p, full_mask(a), s)), 1e-4);
}

TEST(Hvp, MatchesDifferenceOfGradients) {
  Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const auto kind = trial % 2 ? ArchKind::ffn : ArchKind::siren;
    const ArchSpec a = random_arch(rng, kind, 300);
    const auto net = build_network(a);
    const Mask m = random_mask(rng, a);
    Eigen::VectorXd p = random_params(rng, a).values;
    zero_pruned(m, p);
    const Signal s = random_signal(rng, a.in_dim, a.out_dim, 6);
    Eigen::VectorXd v = random_params(rng, a).values.cwiseProduct(m.update_gate());
    const double h = 1e-5;
    const Eigen::VectorXd fd = (grad(net, p + h * v, m, s) - grad(net, p - h * v, m, s)) / (2 * h);
    EXPECT_LE(rel_error(hvp(net, p, m, s, v), fd), 1e-6) << "trial " << trial;
  }
}

TEST(MetaGradient, ZeroStepsEqualsGrad) {
  Rng rng(11);
  const ArchSpec a = random_arch(rng, ArchKind::siren, 200);
  const auto net = build_network(a);
  const Mask m = random_mask(rng, a);
  const Eigen::VectorXd p = random_params(rng, a).values;
  const Signal s = random_signal(rng, a.in_dim, a.out_dim, 6);
  const auto mg = meta_gradient(net, p, m, s, {0.01, 0});
  EXPECT_EQ(mg.grad, grad(net, p, m, s));
}

TEST(MetaGradient, ZeroLearningRateCollapsesToGrad) {
  Rng rng(12);
  for (std::size_t t = 1; t <= 3; ++t) {
    const ArchSpec a = random_arch(rng, ArchKind::siren, 200);
    const auto net = build_network(a);
    const Mask m = random_mask(rng, a);
    const Eigen::VectorXd p = random_params(rng, a).values;
    const Signal s = random_signal(rng, a.in_dim, a.out_dim, 6);
    const auto g = grad(net, p, m, s);
    EXPECT_LE((meta_gradient(net, p, m, s, {0.0, t}).grad - g).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(MetaGradient, OneParamClosedForm) {
  // theta' = (1 - 2a) theta, L(theta') = theta'^2, so dL/dtheta = 2 (1 - 2a)^2 theta.
  const auto mg = meta_gradient(linear1(), Eigen::VectorXd::Constant(1, 1.0), Mask::dense(1), point_signal(1, 0),
                                {0.25, 1});
  EXPECT_DOUBLE_EQ(mg.grad[0], 0.5);
  EXPECT_DOUBLE_EQ(mg.post_loss.value, 0.25);
}

TEST(MetaGradient, MatchesCentralDifferencesOfUnrolledLoop) {
  Rng rng(13);
  for (int trial = 0; trial < 12; ++trial) {
    const auto kind = trial % 2 ? ArchKind::ffn : ArchKind::siren;
    const ArchSpec a = random_arch(rng, kind, 200);
    const auto net = build_network(a);
    const Mask m = random_mask(rng, a);
    // Unit-scale weights at omega ~5 give gradients near 1e6, where one inner
    // step is already far outside the range central differences can follow.
    const Eigen::VectorXd p = random_params(rng, a, 0.5).values;
    const Signal s = random_signal(rng, a.in_dim, a.out_dim, 6);
    // The three-layer cases stay curved enough at h = 1e-5 to miss 1e-4.
    const double lr = 1e-3;
    const std::size_t t = 2;
    const auto fd = central_diff([&](const Eigen::VectorXd& x) { return post_loss(net, x, m, s, lr, t); }, p, m, 1e-6);
    EXPECT_LE(rel_error(meta_gradient(net, p, m, s, {lr, t}).grad, fd), 1e-4) << "trial " << trial;
  }
}

TEST(MetaGradient, FirstOrderDropsHessianTerms) {
  Rng rng(14);
  const ArchSpec a = random_arch(rng, ArchKind::siren, 200);
  const auto net = build_network(a);
  const Mask m = full_mask(a);
  const Eigen::VectorXd p = random_params(rng, a).values;
  const Signal s = random_signal(rng, a.in_dim, a.out_dim, 6);
  const double lr = 1e-2;
  Eigen::VectorXd adapted = p;
  for (int k = 0; k < 2; ++k) adapted -= lr * grad(net, adapted, m, s);
  const auto fo = meta_gradient(net, p, m, s, {lr, 2, MetaOrder::first});
  EXPECT_LE(rel_error(fo.grad, grad(net, adapted, m, s)), 1e-12);
  const auto so = meta_gradient(net, p, m, s, {lr, 2, MetaOrder::second});
  EXPECT_GT(rel_error(so.grad, fo.grad), 1e-6);
  EXPECT_DOUBLE_EQ(fo.post_loss.value, so.post_loss.value);
}

TEST(MetaGradient, NegativeLearningRateRejected) {
  EXPECT_THROW(meta_gradient(linear1(), Eigen::VectorXd::Ones(1), Mask::dense(1), point_signal(1, 0), {-1.0, 1}),
               ConfigError);
}
