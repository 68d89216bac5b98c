#include <gtest/gtest.h>

#include "efy/conjugate.hpp"
#include "oracles.hpp"

using namespace efy;

namespace {

QuadraticInput scalar_lq(double a, double b) {
  Mat A(1, 1);
  A << a;
  Vec bb(1);
  bb << b;
  return {A, bb};
}

SolverConfig tight() {
  SolverConfig cfg;
  cfg.tolerance = 1e-12;
  cfg.max_sweeps = 100000;
  cfg.max_iters = 100000;
  return cfg;
}

}  // namespace

TEST(Conjugate, ScalarLinearQuadraticExample) {
  const auto r = conjugate(Energy::linear_quadratic(1), Regularizer::squared_l2(1.0, OutputSet::reals(1)),
                           scalar_lq(-1.0, 1.0));
  EXPECT_EQ(r.value, 0.25);
  EXPECT_EQ(r.argmax[0], 0.5);
  EXPECT_EQ(r.status.kind, SolverStatus::Kind::ClosedForm);
  // d/db = p*
  EXPECT_EQ(std::get<QuadraticInput>(r.envelope_grad).b[0], 0.5);
}

TEST(Conjugate, LinearQuadraticZeroB) {
  const Mat A = -Mat::Identity(3, 3);
  const auto r = conjugate(Energy::linear_quadratic(3), Regularizer::squared_l2(1.0, OutputSet::reals(3)),
                           QuadraticInput{A, Vec::Zero(3)});
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.argmax.norm(), 0.0);
}

TEST(Conjugate, BilinearSquaredL2) {
  Vec v(2);
  v << 3, 4;
  const auto r = conjugate(Energy::bilinear(Mat::Identity(2, 2)), Regularizer::squared_l2(1.0, OutputSet::reals(2)), v);
  EXPECT_DOUBLE_EQ(r.value, 12.5);
  EXPECT_EQ(r.argmax, v);
  EXPECT_EQ(std::get<Vec>(r.envelope_grad), v);
}

TEST(Conjugate, InfeasibleLinearQuadratic) {
  EXPECT_THROW(conjugate(Energy::linear_quadratic(1), Regularizer::squared_l2(1.0, OutputSet::reals(1)),
                         scalar_lq(2.0, 1.0)),
               InfeasibleError);
}

TEST(Conjugate, IndicatorOverRealsDiverges) {
  Vec v(2);
  v << 1, -1;
  SolverConfig cfg;
  cfg.max_iters = 200;
  EXPECT_THROW(conjugate(Energy::bilinear(Mat::Identity(2, 2)), Regularizer::indicator(OutputSet::reals(2)), v, cfg),
               DivergenceError);
}

TEST(Conjugate, PairwiseExampleMatchesGrid) {
  Vec u(2);
  u << 0.4, -0.2;
  Mat U(2, 2);
  U << 1, 0.5, 0.5, 1;
  U *= -0.5;
  const Regularizer reg = Regularizer::gini_binary(1.0, 2);
  const auto r = conjugate(Energy::pairwise_multilabel(2), reg, QuadraticInput{U, u});
  EXPECT_EQ(r.solver, "coordinate_ascent");
  const auto grid = oracle::cube_grid(2, 1e-3);
  const auto best = oracle::grid_max(
      [&](const Vec& p) { return oracle::pairwise_energy(u, U, p) - oracle::gini(p, 1.0); }, grid);
  EXPECT_LE((r.argmax - best.point).cwiseAbs().maxCoeff(), 2e-3);
  EXPECT_NEAR(r.value, best.value, 1e-5);
}

TEST(Conjugate, ValueArgmaxInvariant) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const Mat U = oracle::random_nsd(3, 2, [&] { return rng.normal(); });
    const QuadraticInput v{U, rng.normal_vec(3, 2.0)};
    for (const Regularizer& reg : {Regularizer::gini_binary(0.7, 3), Regularizer::shannon_binary(0.5, 3),
                                   Regularizer::squared_l2(1.2, OutputSet::box01(3))}) {
      const auto r = conjugate(Energy::pairwise_multilabel(3), reg, v);
      EXPECT_TRUE(reg.domain().contains(r.argmax));
      EXPECT_NEAR(r.value, Energy::pairwise_multilabel(3).value(v, r.argmax) - reg.value(r.argmax), 1e-10);
      if (r.status.kind == SolverStatus::Kind::Converged) {
        EXPECT_LE(r.status.gap, SolverConfig{}.tolerance);
      }
    }
  }
}

TEST(CoordinateAscent, HardSigmoidOneSweep) {
  const auto a = coordinate_ascent_box_quadratic(Vec::Zero(1), Mat::Zero(1, 1), Regularizer::gini_binary(1.0, 1),
                                                 SolverConfig{});
  EXPECT_DOUBLE_EQ(a.point[0], 0.5);
  EXPECT_LE(a.status.iterations, 2);
}

TEST(CoordinateAscent, UpdateFormula) {
  // one coordinate, U_jj < 0: clip((u + gamma) / (2 gamma - U_jj))
  Mat U(1, 1);
  U << -2.0;
  Vec u(1);
  u << 0.6;
  const auto a = coordinate_ascent_box_quadratic(u, U, Regularizer::gini_binary(1.5, 1), SolverConfig{});
  EXPECT_NEAR(a.point[0], (0.6 + 1.5) / (3.0 + 2.0), 1e-14);
}

TEST(CoordinateAscent, RejectsNonNsd) {
  EXPECT_THROW(coordinate_ascent_box_quadratic(Vec::Zero(2), Mat::Identity(2, 2), Regularizer::gini_binary(1.0, 2),
                                               SolverConfig{}),
               ContractViolation);
}

TEST(CoordinateAscent, MatchesGridAndPga) {
  Rng rng(5);
  for (Eigen::Index k = 1; k <= 2; ++k) {
    const auto grid = oracle::cube_grid(static_cast<int>(k), 1e-3);
    for (int t = 0; t < 10; ++t) {
      const Mat U = oracle::random_nsd(k, 2, [&] { return rng.normal(); });
      const Vec u = rng.normal_vec(k, 1.5);
      const double gamma = rng.uniform(0.3, 2.0);
      const Regularizer reg = Regularizer::gini_binary(gamma, k);
      const auto ca = coordinate_ascent_box_quadratic(u, U, reg, tight());
      auto f = [&](const Vec& p) { return oracle::pairwise_energy(u, U, p) - oracle::gini(p, gamma); };
      EXPECT_LE((ca.point - oracle::grid_max(f, grid).point).cwiseAbs().maxCoeff(), 2e-3);
      auto g = [&](const Vec& p) -> Vec { return u + U * p - reg.gradient(p); };
      const auto pga = projected_gradient_ascent(f, g, reg.domain(), reg.domain().center(), tight());
      EXPECT_LE((ca.point - pga.point).cwiseAbs().maxCoeff(), 1e-5);
    }
  }
}

TEST(Pga, InteriorOptimumMatchesClosedForm) {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    const Mat A = symmetric_part(rng.normal_mat(3, 3));
    const double gamma = max_eigenvalue(A) + rng.uniform(0.5, 2.0);
    const Vec b = rng.normal_vec(3, 0.05) + (gamma * Mat::Identity(3, 3) - A) * Vec::Constant(3, 0.5);
    // unconstrained optimum (gamma I - A)^{-1} b = 0.5 + small: interior of [0,1]^3
    const Mat M = gamma * Mat::Identity(3, 3) - A;
    const Vec exact = M.llt().solve(b);
    ASSERT_TRUE(OutputSet::box01(3).contains(exact));
    auto f = [&](const Vec& p) { return 0.5 * p.dot(A * p) + b.dot(p) - 0.5 * gamma * p.squaredNorm(); };
    auto g = [&](const Vec& p) -> Vec { return A * p + b - gamma * p; };
    const auto r = projected_gradient_ascent(f, g, OutputSet::box01(3), Vec::Zero(3), SolverConfig{});
    EXPECT_LE((r.point - exact).norm(), 1e-6);
    EXPECT_EQ(r.status.kind, SolverStatus::Kind::Converged);
  }
}

TEST(Pga, CornerOptimum) {
  Vec u(2);
  u << 50, -50;
  auto f = [&](const Vec& p) { return u.dot(p) - 0.5 * p.squaredNorm(); };
  auto g = [&](const Vec& p) -> Vec { return u - p; };
  const auto r = projected_gradient_ascent(f, g, OutputSet::box01(2), Vec::Constant(2, 0.5), SolverConfig{});
  EXPECT_EQ(r.point[0], 1.0);
  EXPECT_EQ(r.point[1], 0.0);
}

TEST(Pga, MonotoneAcrossIterations) {
  Rng rng(9);
  const Mat U = oracle::random_nsd(4, 2, [&] { return rng.normal(); });
  const Vec u = rng.normal_vec(4, 2.0);
  auto f = [&](const Vec& p) { return oracle::pairwise_energy(u, U, p) - 0.3 * p.squaredNorm(); };
  auto g = [&](const Vec& p) -> Vec { return u + U * p - 0.6 * p; };
  double prev = -kInf;
  for (int n = 1; n <= 60; ++n) {
    SolverConfig cfg;
    cfg.max_iters = n;
    const auto r = projected_gradient_ascent(f, g, OutputSet::box01(4), Vec::Constant(4, 0.5), cfg);
    EXPECT_GE(r.objective, prev - 1e-15);
    prev = r.objective;
  }
}

TEST(Pga, SpenNonconcaveRestarts) {
  Rng rng(11);
  const Eigen::Index k = 3;
  const Energy e = Energy::spen(k, 6, false);
  PriorWeights w{rng.normal_mat(6, k, 2.0), rng.normal_vec(6), rng.normal_vec(6, 2.0), 0.0};
  const SpenInput v{rng.normal_vec(k), w};
  const Regularizer reg = Regularizer::gini_binary(0.5, k);
  const auto r = conjugate(e, reg, v);
  EXPECT_EQ(r.status.kind, SolverStatus::Kind::LocalOnly);
  const Vec half = Vec::Constant(k, 0.5);
  const double at_half = e.value(v, half) - reg.value(half);
  EXPECT_GE(r.value, at_half - 1e-12);
  for (std::uint64_t seed : {1u, 2u}) {
    for (const auto& a : conjugate_restarts(e, reg, v, SolverConfig{}, 3, seed)) {
      EXPECT_EQ(a.status.kind, SolverStatus::Kind::LocalOnly);
      EXPECT_TRUE(reg.domain().contains(a.point));
    }
  }
}

TEST(Envelope, LinearQuadraticFiniteDifferences) {
  Rng rng(13);
  for (int t = 0; t < 50; ++t) {
    const Mat A = symmetric_part(rng.normal_mat(3, 3));
    const double gamma = max_eigenvalue(A) + rng.uniform(0.5, 2.0);
    const Regularizer reg = Regularizer::squared_l2(gamma, OutputSet::reals(3));
    const Energy e = Energy::linear_quadratic(3);
    const QuadraticInput v{A, rng.normal_vec(3)};
    const auto r = conjugate(e, reg, v);
    auto f = [&](const Vec& w) { return conjugate(e, reg, unflatten_like(v, w)).value; };
    const Vec fd = finite_diff_grad(f, flatten(v));
    EXPECT_LE(oracle::rel_err(flatten(envelope_gradient(e, reg, v, r)), fd), 1e-5);
    // dA = 1/2 p p^T
    const auto& g = std::get<QuadraticInput>(r.envelope_grad);
    EXPECT_LE((g.A - 0.5 * r.argmax * r.argmax.transpose()).norm(), 1e-14);
  }
}

TEST(Envelope, PairwiseFiniteDifferences) {
  Rng rng(17);
  const Energy e = Energy::pairwise_multilabel(3);
  const Regularizer reg = Regularizer::gini_binary(1.0, 3);
  for (int t = 0; t < 50; ++t) {
    const QuadraticInput v{oracle::random_nsd(3, 1, [&] { return rng.normal(); }), rng.normal_vec(3)};
    const auto r = conjugate(e, reg, v);
    auto f = [&](const Vec& w) {
      const auto in = std::get<QuadraticInput>(unflatten_like(v, w));
      // keep the perturbed U symmetric so the coordinate-ascent contract holds
      return conjugate(e, reg, QuadraticInput{symmetric_part(in.A), in.b}).value;
    };
    const Vec flat = flatten(v);
    const Vec fd = finite_diff_grad(f, flat);
    // symmetric perturbation spreads dU_ij over both entries; compare against the symmetrized envelope
    auto g = std::get<QuadraticInput>(r.envelope_grad);
    EXPECT_LE(oracle::rel_err(flatten(EnergyInput(QuadraticInput{symmetric_part(g.A), g.b})), fd), 1e-4);
  }
}

TEST(Envelope, BilinearIsIdentityGradient) {
  Rng rng(19);
  const Regularizer reg = Regularizer::squared_l2(1.0, OutputSet::reals(3));
  for (int t = 0; t < 20; ++t) {
    const Vec v = rng.normal_vec(3);
    const auto r = conjugate(Energy::bilinear(Mat::Identity(3, 3)), reg, v);
    EXPECT_LE((std::get<Vec>(r.envelope_grad) - v).norm(), 1e-15);
  }
}

TEST(CTransform, IdentityRelation) {
  Rng rng(23);
  const auto grid = box_grid(OutputSet::box01(2), 0.01);
  const Regularizer reg = Regularizer::gini_binary(0.8, 2);
  for (int t = 0; t < 50; ++t) {
    const Mat U = rng.normal_mat(3, 2);
    const Vec v = rng.normal_vec(3);
    auto phi = [&](const Vec& w, const Vec& p) { return w.dot(U * p); };
    auto omega = [&](const Vec& p) { return reg.value(p); };
    const double conj = grid_conjugate(phi, omega, v, grid).value;
    const double ct = c_transform([&](const Vec& p) { return -omega(p); },
                                  [&](const Vec& w, const Vec& p) { return -phi(w, p); }, v, grid);
    EXPECT_NEAR(ct, -conj, 1e-8);
  }
}

TEST(CTransform, MetricCoupling) {
  // Phi = -|v - p|, Omega 1-Lipschitz -> Omega^Phi(v) = -Omega(v), argmax v
  const auto grid = box_grid(OutputSet::box01(1), 1e-3);
  auto phi = [](const Vec& v, const Vec& p) { return -(v - p).lpNorm<1>(); };
  auto omega = [](const Vec& p) { return 0.8 * std::abs(p[0] - 0.3) + 0.1 * std::sin(p[0]); };
  for (double x : {0.0, 0.25, 0.5, 0.731, 1.0}) {
    Vec v(1);
    v << x;
    const auto r = grid_conjugate(phi, omega, v, grid);
    EXPECT_NEAR(r.value, -omega(v), 1e-12);
    EXPECT_NEAR(r.argmax[0], x, 1e-9);
  }
}

TEST(CTransform, ConstantLambda) {
  const auto grid = box_grid(OutputSet::box01(1), 0.1);
  Vec v(1);
  v << 0.35;
  auto cost = [](const Vec& w, const Vec& p) { return std::abs(w[0] - p[0]); };
  EXPECT_NEAR(c_transform([](const Vec&) { return 2.0; }, cost, v, grid), 0.05 - 2.0, 1e-12);
  EXPECT_THROW(c_transform([](const Vec&) { return 0.0; }, cost, v, std::span<const Vec>{}), ContractViolation);
}

TEST(BoxGrid, Counts) {
  EXPECT_EQ(box_grid(OutputSet::box01(2), 0.5).size(), 9u);
  EXPECT_EQ(box_grid(OutputSet::box01(1), 1e-3).size(), 1001u);
  EXPECT_THROW(box_grid(OutputSet::reals(1), 0.1), ContractViolation);
}

TEST(SolverConfig, Validation) {
  SolverConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.shrink = 1.0;
  EXPECT_THROW(cfg.validate(), ContractViolation);
  cfg = {};
  cfg.tolerance = 0.0;
  EXPECT_THROW(cfg.validate(), ContractViolation);
  cfg = {};
  cfg.max_iters = 0;
  EXPECT_THROW(cfg.validate(), ContractViolation);
}
