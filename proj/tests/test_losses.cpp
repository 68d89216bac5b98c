#include <gtest/gtest.h>

#include "efy/losses.hpp"
#include "oracles.hpp"

using namespace efy;

namespace {

QuadraticInput random_pairwise(Rng& rng, Eigen::Index k) {
  return {oracle::random_nsd(k, 1, [&] { return rng.normal(); }), rng.normal_vec(k)};
}

}  // namespace

TEST(GfyLoss, SquaredLoss) {
  Vec v(2), y(2);
  v << 1, 0;
  y << 0, 0;
  const auto r = gfy_loss(Energy::bilinear(Mat::Identity(2, 2)), Regularizer::squared_l2(1.0, OutputSet::reals(2)), v, y);
  EXPECT_DOUBLE_EQ(r.value, 0.5);
  EXPECT_EQ(std::get<Vec>(r.grad_v), v - y);
}

TEST(GfyLoss, ZeroAtArgmax) {
  Rng rng(1);
  const Energy e = Energy::pairwise_multilabel(3);
  const Regularizer reg = Regularizer::gini_binary(1.0, 3);
  for (int t = 0; t < 50; ++t) {
    const auto v = random_pairwise(rng, 3);
    const Vec p = conjugate(e, reg, v).argmax;
    EXPECT_LE(std::abs(gfy_loss(e, reg, v, p).value), 1e-8);
  }
}

TEST(GfyLoss, ValueDecomposition) {
  Rng rng(2);
  const Energy e = Energy::pairwise_multilabel(2);
  const Regularizer reg = Regularizer::gini_binary(0.8, 2);
  const auto grid = oracle::cube_grid(2, 1e-3);
  for (int t = 0; t < 10; ++t) {
    const auto v = random_pairwise(rng, 2);
    const Vec y = oracle::vertices(2)[rng.index(4)];
    const auto r = gfy_loss(e, reg, v, y);
    ASSERT_TRUE(r.conjugate.has_value());
    EXPECT_NEAR(r.value, r.conjugate->value + reg.value(y) - e.value(v, y), 1e-10);
    const double conj =
        oracle::grid_max([&](const Vec& p) { return oracle::pairwise_energy(v.b, v.A, p) - oracle::gini(p, 0.8); }, grid)
            .value;
    EXPECT_NEAR(r.value, conj + oracle::gini(y, 0.8) - oracle::pairwise_energy(v.b, v.A, y), 1e-3);
  }
}

TEST(GfyLoss, LabelOutsideSet) {
  Vec y(2);
  y << 0.5, 2.0;
  EXPECT_THROW(gfy_loss(Energy::pairwise_multilabel(2), Regularizer::gini_binary(1.0, 2),
                        QuadraticInput{Mat::Zero(2, 2), Vec::Zero(2)}, y),
               ContractViolation);
}

TEST(GfyLoss, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  const Energy e = Energy::pairwise_multilabel(3);
  const Regularizer reg = Regularizer::gini_binary(1.0, 3);
  SolverConfig cfg;
  cfg.tolerance = 1e-12;
  for (int t = 0; t < 30; ++t) {
    const auto v = random_pairwise(rng, 3);
    const Vec y = oracle::vertices(3)[rng.index(8)];
    const auto r = gfy_loss(e, reg, v, y, cfg);
    // perturb u only (U perturbations break symmetry)
    auto f = [&](const Vec& u) { return gfy_loss(e, reg, QuadraticInput{v.A, u}, y, cfg).value; };
    const Vec fd = finite_diff_grad(f, v.b);
    EXPECT_LE(oracle::rel_err(std::get<QuadraticInput>(r.grad_v).b, fd), 1e-5);
  }
}

TEST(PerceptronLoss, BilinearVertices) {
  Vec v(2), y(2);
  v << 1, -1;
  y << 1, 0;
  const auto r = perceptron_loss(Energy::bilinear(Mat::Identity(2, 2)), OutputSet::box01(2), v, y);
  EXPECT_DOUBLE_EQ(r.value, 0.0);
  y << 0, 1;
  EXPECT_DOUBLE_EQ(perceptron_loss(Energy::bilinear(Mat::Identity(2, 2)), OutputSet::box01(2), v, y).value, 2.0);
}

TEST(PerceptronLoss, PairwiseOverBox) {
  // concave in p, so the max over [0,1]^2 may be interior: vertices give a lower bound, a grid gives the value
  Rng rng(4);
  const Energy e = Energy::pairwise_multilabel(2);
  const auto grid = oracle::cube_grid(2, 1e-3);
  for (int t = 0; t < 100; ++t) {
    const auto v = random_pairwise(rng, 2);
    const Vec y = oracle::vertices(2)[rng.index(4)];
    double vertex_best = -kInf;
    for (const Vec& z : oracle::vertices(2)) vertex_best = std::max(vertex_best, oracle::pairwise_energy(v.b, v.A, z));
    const double box_best = oracle::grid_max([&](const Vec& p) { return oracle::pairwise_energy(v.b, v.A, p); }, grid).value;
    const auto r = perceptron_loss(e, OutputSet::box01(2), v, y);
    const double fy = oracle::pairwise_energy(v.b, v.A, y);
    EXPECT_GE(r.value, vertex_best - fy - 1e-9);
    EXPECT_NEAR(r.value, box_best - fy, 1e-5);
  }
}

TEST(PerceptronLoss, LinearPairwiseMatchesVertexEnumeration) {
  Rng rng(14);
  const Energy e = Energy::pairwise_multilabel(2);
  for (int t = 0; t < 100; ++t) {
    const QuadraticInput v{Mat::Zero(2, 2), rng.normal_vec(2)};
    const Vec y = oracle::vertices(2)[rng.index(4)];
    double best = -kInf;
    for (const Vec& z : oracle::vertices(2)) best = std::max(best, oracle::pairwise_energy(v.b, v.A, z));
    EXPECT_NEAR(perceptron_loss(e, OutputSet::box01(2), v, y).value, best - oracle::pairwise_energy(v.b, v.A, y), 1e-12);
  }
}

TEST(EnergyLoss, Examples) {
  Vec v(2), y(2);
  v << 1, 2;
  y << 1, 0;
  EXPECT_DOUBLE_EQ(energy_loss(Energy::bilinear(Mat::Identity(2, 2)), v, y).value, -1.0);
  Mat U(2, 2);
  U << -1, -1, -1, -1;
  Vec u(2);
  u << 1, 1;
  const auto r = energy_loss(Energy::pairwise_multilabel(2), QuadraticInput{U, u}, y);
  EXPECT_DOUBLE_EQ(r.value, -0.5);
  const Vec fd = finite_diff_grad(
      [&](const Vec& w) { return energy_loss(Energy::pairwise_multilabel(2), unflatten_like(QuadraticInput{U, u}, w), y).value; },
      flatten(QuadraticInput{U, u}));
  EXPECT_LE(oracle::rel_err(flatten(r.grad_v), fd), 1e-8);
}

TEST(XentLoss, MatchesBinaryCrossEntropy) {
  Rng rng(5);
  const Energy e = Energy::bilinear(Mat::Identity(3, 3));
  const Regularizer reg = Regularizer::shannon_binary(1.0, 3);
  for (int t = 0; t < 20; ++t) {
    const Vec v = rng.normal_vec(3);
    const Vec y = oracle::vertices(3)[rng.index(8)];
    double bce = 0.0;
    for (int j = 0; j < 3; ++j) {
      const double p = 1.0 / (1.0 + std::exp(-v[j]));
      bce -= y[j] * std::log(p) + (1 - y[j]) * std::log(1 - p);
    }
    const auto r = xent_loss(e, reg, v, y);
    EXPECT_NEAR(r.value, bce, 1e-9);
    // logistic link: gradient is sigmoid(v) - y
    Vec expect(3);
    for (int j = 0; j < 3; ++j) expect[j] = 1.0 / (1.0 + std::exp(-v[j])) - y[j];
    EXPECT_LE((std::get<Vec>(r.grad_v) - expect).norm(), 1e-5);
  }
}

TEST(FyLoss, LinearizedBoundTightForBilinear) {
  Rng rng(6);
  const Mat U = rng.normal_mat(3, 3);
  const Energy e = Energy::bilinear(U);
  const Regularizer reg = Regularizer::gini_binary(1.0, 3);
  for (int t = 0; t < 100; ++t) {
    const Vec v = rng.normal_vec(3);
    const Vec p = rng.uniform_vec(3);
    EXPECT_NEAR(linearized_fy_upper_bound(e, reg, v, p), gfy_loss(e, reg, v, p).value, 1e-10);
  }
}

TEST(FyLoss, LinearizedBoundDominates) {
  Rng rng(7);
  const Energy e = Energy::pairwise_multilabel(3);
  const Regularizer reg = Regularizer::gini_binary(1.0, 3);
  for (int t = 0; t < 200; ++t) {
    const auto v = random_pairwise(rng, 3);
    const Vec p = rng.uniform_vec(3);
    EXPECT_GE(linearized_fy_upper_bound(e, reg, v, p), gfy_loss(e, reg, v, p).value - 1e-9);
  }
  EXPECT_THROW(linearized_fy_upper_bound(Energy::spen(2, 2, false), Regularizer::gini_binary(1.0, 2),
                                         SpenInput{Vec::Zero(2), PriorWeights{Mat::Zero(2, 2), Vec::Zero(2), Vec::Zero(2), 0.0}},
                                         Vec::Constant(2, 0.5)),
               ContractViolation);
}

TEST(FyLoss, LinearQuadraticBound) {
  Rng rng(8);
  const Energy e = Energy::linear_quadratic(3);
  for (int t = 0; t < 200; ++t) {
    const Mat A = oracle::random_nsd(3, 3, [&] { return rng.normal(); });
    const Regularizer reg = Regularizer::squared_l2(rng.uniform(0.2, 2.0), OutputSet::reals(3));
    const QuadraticInput v{A, rng.normal_vec(3)};
    const Vec p = rng.normal_vec(3);
    EXPECT_GE(linearized_fy_upper_bound(e, reg, v, p), gfy_loss(e, reg, v, p).value - 1e-9);
  }
}

TEST(ThroughArgmax, AgreesWithEnvelope) {
  Rng rng(9);
  const Energy e = Energy::pairwise_multilabel(2);
  const Regularizer reg = Regularizer::gini_binary(1.0, 2);
  SolverConfig cfg;
  cfg.tolerance = 1e-12;
  for (int t = 0; t < 20; ++t) {
    const auto v = random_pairwise(rng, 2);
    const auto env = flatten(conjugate(e, reg, v, cfg).envelope_grad);
    const auto fd = flatten(conjugate_gradient_through_argmax(e, reg, v, cfg));
    EXPECT_LE(oracle::rel_err(env, fd), 1e-4);
  }
}

TEST(LossKinds, Names) {
  for (auto k : {LossKind::Gfy, LossKind::Perceptron, LossKind::Energy, LossKind::Xent}) {
    EXPECT_EQ(loss_kind_from_name(loss_kind_name(k)), k);
  }
  EXPECT_FALSE(loss_kind_from_name("hinge").has_value());
}

TEST(LossKinds, DispatchPerceptronUsesIndicator) {
  Rng rng(10);
  const Energy e = Energy::pairwise_multilabel(2);
  const Regularizer reg = Regularizer::gini_binary(1.0, 2);
  const auto v = random_pairwise(rng, 2);
  const Vec y = oracle::vertices(2)[1];
  EXPECT_NEAR(evaluate_loss(LossKind::Perceptron, e, reg, v, y).value,
              perceptron_loss(e, OutputSet::box01(2), v, y).value, 1e-12);
  EXPECT_NEAR(evaluate_loss(LossKind::Gfy, e, reg, v, y).value, gfy_loss(e, reg, v, y).value, 1e-12);
}
