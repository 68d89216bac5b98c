#include <gtest/gtest.h>

#include "efy/energy.hpp"
#include "efy/regularizer.hpp"
#include "oracles.hpp"

using namespace efy;

namespace {

PriorWeights random_prior(Rng& rng, Eigen::Index k, Eigen::Index m) {
  PriorWeights w;
  w.W1 = rng.normal_mat(m, k);
  w.b1 = rng.normal_vec(m);
  w.w2 = rng.normal_vec(m);
  w.b2 = rng.normal();
  return w;
}

struct Case {
  Energy energy;
  EnergyInput v;
};

// One random (energy, input) pair per family, with p-space of size k (1 for scalar-p kinds).
std::vector<Case> random_cases(Rng& rng) {
  const Eigen::Index k = 3, d = 4;
  std::vector<Case> out;
  out.push_back({Energy::bilinear(rng.normal_mat(d, k)), Vec(rng.normal_vec(d))});
  Mat A = rng.normal_mat(k, k);
  out.push_back({Energy::linear_quadratic(k), QuadraticInput{symmetric_part(A), rng.normal_vec(k)}});
  out.push_back({Energy::pairwise_multilabel(k),
                 QuadraticInput{oracle::random_nsd(k, 1, [&] { return rng.normal(); }), rng.normal_vec(k)}});
  out.push_back({Energy::rectifier(rng.uniform_mat(d, k, 0.0, 1.0)), Vec(rng.normal_vec(d))});
  out.push_back({Energy::maxout(d), Vec(rng.normal_vec(d))});
  out.push_back({Energy::lse_net(d, 0.8), Vec(rng.normal_vec(d))});
  out.push_back({Energy::spen(k, 5, true), SpenInput{rng.normal_vec(k), random_prior(rng, k, 5)}});
  out.push_back({Energy::spen(k, 5, false), SpenInput{rng.normal_vec(k), random_prior(rng, k, 5)}});
  return out;
}

}  // namespace

TEST(Energy, ValueExamples) {
  Vec v(2), p(2);
  v << 1, 2;
  p << 3, 4;
  EXPECT_DOUBLE_EQ(Energy::bilinear(Mat::Identity(2, 2)).value(v, p), 11.0);

  Mat a(1, 1);
  a << -1;
  Vec b(1), q(1);
  b << 1;
  q << 0.5;
  EXPECT_DOUBLE_EQ(Energy::linear_quadratic(1).value(QuadraticInput{a, b}, q), 0.375);

  Mat U(2, 2);
  U << -1, -1, -1, -1;
  Vec u(2), y(2);
  u << 1, 1;
  y << 1, 0;
  EXPECT_DOUBLE_EQ(Energy::pairwise_multilabel(2).value(QuadraticInput{U, u}, y), 0.5);
  EXPECT_DOUBLE_EQ(oracle::pairwise_energy(u, U, y), 0.5);
}

TEST(Energy, GradientsMatchFiniteDifferences) {
  Rng rng(101);
  for (int t = 0; t < 40; ++t) {
    for (const Case& c : random_cases(rng)) {
      const Eigen::Index k = c.energy.output_dim();
      const Vec p = rng.uniform_vec(k, 0.05, 0.95);
      const Vec fd_p = finite_diff_grad([&](const Vec& q) { return c.energy.value(c.v, q); }, p);
      EXPECT_LE(oracle::rel_err(c.energy.grad_p(c.v, p), fd_p), 1e-5) << c.energy.name();

      const Vec flat = flatten(c.v);
      auto f = [&](const Vec& w) { return c.energy.value(unflatten_like(c.v, w), p); };
      const Vec fd_v = finite_diff_grad(f, flat);
      const Vec an_v = flatten(c.energy.grad_v(c.v, p));
      if (c.energy.kind() == Energy::Kind::Maxout || c.energy.kind() == Energy::Kind::Rectifier) {
        // kinks: only compare away from ties / zero crossings
        const Vec& x = std::get<Vec>(c.v);
        std::vector<double> s(x.data(), x.data() + x.size());
        std::sort(s.rbegin(), s.rend());
        if (c.energy.kind() == Energy::Kind::Maxout && s[0] - s[1] < 1e-3) continue;
        if (c.energy.kind() == Energy::Kind::Rectifier && x.cwiseAbs().minCoeff() < 1e-3) continue;
      }
      EXPECT_LE(oracle::rel_err(an_v, fd_v), 1e-5) << c.energy.name();
    }
  }
}

TEST(Energy, PairwiseGradients) {
  Rng rng(103);
  const Mat U = oracle::random_nsd(3, 2, [&] { return rng.normal(); });
  const Vec u = rng.normal_vec(3), p = rng.uniform_vec(3);
  const Energy e = Energy::pairwise_multilabel(3);
  EXPECT_LE((e.grad_p(QuadraticInput{U, u}, p) - (u + U * p)).norm(), 1e-14);
  const auto g = std::get<QuadraticInput>(e.grad_v(QuadraticInput{U, u}, p));
  EXPECT_LE((g.A - 0.5 * p * p.transpose()).norm(), 1e-15);
  EXPECT_EQ(g.b, p);
}

TEST(Energy, LinearInPCoefficient) {
  Rng rng(107);
  const Vec v = rng.normal_vec(4);
  const Energy net = Energy::lse_net(4, 0.5);
  Vec p(1);
  p << 0.3;
  EXPECT_NEAR(net.grad_p(v, p)[0], lse(v, 0.5), 1e-14);
  const Mat U = rng.normal_mat(4, 2);
  EXPECT_LE((Energy::bilinear(U).linear_coefficient(v) - U.transpose() * v).norm(), 1e-14);
  EXPECT_THROW(Energy::linear_quadratic(2).linear_coefficient(QuadraticInput{Mat::Zero(2, 2), Vec::Zero(2)}),
               UnsupportedOperation);
}

TEST(Energy, MaxoutTieLowestIndex) {
  Vec v(3);
  v << 2, 2, 1;
  Vec p(1);
  p << 0.7;
  const Vec g = std::get<Vec>(Energy::maxout(3).grad_v(v, p));
  EXPECT_DOUBLE_EQ(g[0], 0.7);
  EXPECT_DOUBLE_EQ(g[1], 0.0);
}

TEST(Energy, ConcavityTagHonesty) {
  Rng rng(109);
  for (int t = 0; t < 100; ++t) {
    for (const Case& c : random_cases(rng)) {
      if (!c.energy.concave_in_p()) continue;
      // linear_quadratic with an indefinite A is only concave when A is NSD; use the pairwise kind for that case
      if (c.energy.kind() == Energy::Kind::LinearQuadratic) continue;
      const Eigen::Index k = c.energy.output_dim();
      const Vec p = rng.uniform_vec(k), q = rng.uniform_vec(k);
      const double mid = c.energy.value(c.v, 0.5 * (p + q));
      EXPECT_GE(mid, 0.5 * (c.energy.value(c.v, p) + c.energy.value(c.v, q)) - 1e-9) << c.energy.name();
    }
  }
}

TEST(Energy, ConvexInVForNonnegativeP) {
  Rng rng(113);
  const std::vector<Energy> kinds = {Energy::rectifier(rng.uniform_mat(4, 2, 0.0, 1.0)), Energy::maxout(4),
                                     Energy::lse_net(4, 0.6)};
  for (const Energy& e : kinds) {
    EXPECT_EQ(e.v_structure(), Energy::VStructure::Convex);
    for (int t = 0; t < 300; ++t) {
      const Vec a = rng.normal_vec(4, 2.0), b = rng.normal_vec(4, 2.0);
      const Vec p = rng.uniform_vec(e.output_dim());
      const double mid = e.value(Vec(0.5 * (a + b)), p);
      EXPECT_LE(mid, 0.5 * (e.value(a, p) + e.value(b, p)) + 1e-9) << e.name();
    }
  }
}

TEST(Energy, SpenGradWIsMinusPriorGradient) {
  Rng rng(127);
  const Energy e = Energy::spen(3, 4, true);
  SpenInput in{rng.normal_vec(3), random_prior(rng, 3, 4)};
  const Vec p = rng.uniform_vec(3);
  const auto g = std::get<SpenInput>(e.grad_v(in, p));
  EXPECT_EQ(g.u, p);
  // -dPsi/db2 = -1
  EXPECT_DOUBLE_EQ(g.prior.b2, -1.0);
}

TEST(Energy, ShapeChecks) {
  EXPECT_THROW(Energy::rectifier(-Mat::Ones(2, 2)), ContractViolation);
  const Energy e = Energy::bilinear(Mat::Identity(2, 2));
  EXPECT_THROW(e.value(Vec(Vec::Zero(3)), Vec::Zero(2)), ContractViolation);
  EXPECT_THROW(e.value(QuadraticInput{Mat::Zero(2, 2), Vec::Zero(2)}, Vec::Zero(2)), ContractViolation);
  EXPECT_THROW(e.value(Vec(Vec::Zero(2)), Vec::Zero(1)), ContractViolation);
}

TEST(Energy, FlattenRoundTrip) {
  Rng rng(131);
  for (const Case& c : random_cases(rng)) {
    const Vec flat = flatten(c.v);
    EXPECT_EQ(flatten(unflatten_like(c.v, flat)), flat);
    EXPECT_EQ(flatten(zeros_like(c.v)).norm(), 0.0);
    EXPECT_LE((flatten(add_scaled(c.v, c.v, 2.0)) - 3.0 * flat).norm(), 1e-12);
  }
}

TEST(Energy, JointSmoothness) {
  // spectral norm of [[0, I], [I, A]] by direct eigen-decomposition
  Rng rng(137);
  for (int t = 0; t < 20; ++t) {
    const Mat A = symmetric_part(rng.normal_mat(3, 3));
    Mat H = Mat::Zero(6, 6);
    H.block(0, 3, 3, 3) = Mat::Identity(3, 3);
    H.block(3, 0, 3, 3) = Mat::Identity(3, 3);
    H.block(3, 3, 3, 3) = A;
    Eigen::SelfAdjointEigenSolver<Mat> eig(H);
    EXPECT_NEAR(quadratic_joint_smoothness(A), eig.eigenvalues().cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Energy, Names) {
  for (auto kind : {Energy::Kind::Bilinear, Energy::Kind::LinearQuadratic, Energy::Kind::PairwiseMultilabel,
                    Energy::Kind::Rectifier, Energy::Kind::Maxout, Energy::Kind::LseNet, Energy::Kind::Spen}) {
    EXPECT_EQ(energy_kind_from_name(energy_kind_name(kind)), kind);
  }
  EXPECT_FALSE(energy_kind_from_name("nope").has_value());
}
