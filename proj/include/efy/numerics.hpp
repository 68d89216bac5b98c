#pragma once

// Dense linear-algebra substrate shared by every module: scalar-templated
// aliases, a central-difference gradient harness, an NSD test, an SPD solver
// and a seeded RNG.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "efy/errors.hpp"

namespace efy {

template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vec = VecX<double>;
using Mat = MatX<double>;

inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kNsdTol = 1e-9;

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.allFinite();
}

template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar tol = kSymmetryTol) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

template <typename Derived>
MatX<typename Derived::Scalar> symmetric_part(const Eigen::MatrixBase<Derived>& m) {
  return (m + m.transpose()) / typename Derived::Scalar(2);
}

/// Default central-difference step for coordinate value x.
template <typename Scalar>
Scalar default_fd_step(Scalar x) {
  return Scalar(1e-5) * (Scalar(1) + std::abs(x));
}

/// Central-difference gradient (f(v+h e_i) - f(v-h e_i)) / 2h of a scalar field.
/// A non-positive h selects the per-coordinate default step 1e-5 (1 + |v_i|).
template <typename F, typename Scalar>
VecX<Scalar> finite_diff_grad(F&& f, const VecX<Scalar>& v, Scalar h = Scalar(0)) {
  VecX<Scalar> grad(v.size());
  VecX<Scalar> probe = v;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const Scalar step = h > Scalar(0) ? h : default_fd_step(v[i]);
    probe[i] = v[i] + step;
    const Scalar up = f(probe);
    probe[i] = v[i] - step;
    const Scalar down = f(probe);
    probe[i] = v[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw EvaluationError("finite_diff_grad: non-finite function value at coordinate " +
                            std::to_string(i));
    }
    grad[i] = (up - down) / (Scalar(2) * step);
  }
  return grad;
}

/// Max eigenvalue of a symmetric matrix is <= tol.
template <typename Derived>
bool is_negative_semidefinite(const Eigen::MatrixBase<Derived>& m,
                              typename Derived::Scalar tol = kNsdTol) {
  using Scalar = typename Derived::Scalar;
  if (!is_symmetric(m)) {
    throw ContractViolation("is_negative_semidefinite: matrix is not symmetric");
  }
  if (m.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<MatX<Scalar>> eig(m.eval(), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff() <= tol;
}

/// Largest eigenvalue of a symmetric matrix.
template <typename Derived>
typename Derived::Scalar max_eigenvalue(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Eigen::SelfAdjointEigenSolver<MatX<Scalar>> eig(symmetric_part(m), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

/// Solves M x = b for symmetric positive definite M by Cholesky with one
/// step of iterative refinement. Throws SingularityError naming the first
/// non-positive pivot.
template <typename DerivedM, typename DerivedB>
VecX<typename DerivedM::Scalar> solve_spd(const Eigen::MatrixBase<DerivedM>& m,
                                          const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedM::Scalar;
  const Eigen::Index n = m.rows();
  if (m.cols() != n || b.size() != n) {
    throw ContractViolation("solve_spd: shape mismatch");
  }
  if (!is_symmetric(m, Scalar(1e-12) * (Scalar(1) + m.cwiseAbs().maxCoeff()))) {
    throw ContractViolation("solve_spd: matrix is not symmetric");
  }
  MatX<Scalar> lower = MatX<Scalar>::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Scalar diag = m(j, j);
    for (Eigen::Index p = 0; p < j; ++p) diag -= lower(j, p) * lower(j, p);
    if (!(diag > Scalar(0))) throw SingularityError(static_cast<std::size_t>(j), diag);
    const Scalar ljj = std::sqrt(diag);
    lower(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      Scalar s = m(i, j);
      for (Eigen::Index p = 0; p < j; ++p) s -= lower(i, p) * lower(j, p);
      lower(i, j) = s / ljj;
    }
  }
  const MatX<Scalar> upper = lower.transpose();
  auto solve = [&](const VecX<Scalar>& rhs) {
    VecX<Scalar> y = lower.template triangularView<Eigen::Lower>().solve(rhs);
    return VecX<Scalar>(upper.template triangularView<Eigen::Upper>().solve(y));
  };
  VecX<Scalar> x = solve(b);
  const VecX<Scalar> residual = b - m * x;
  x += solve(residual);
  return x;
}

/// Seeded pseudo-random source. Identical seeds give identical streams on a
/// given platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  bool bernoulli(double p) { return uniform() < p; }

  Vec uniform_vec(Eigen::Index n, double lo = 0.0, double hi = 1.0) {
    Vec out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = uniform(lo, hi);
    return out;
  }
  Vec normal_vec(Eigen::Index n, double stddev = 1.0) {
    Vec out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = normal(0.0, stddev);
    return out;
  }
  Mat normal_mat(Eigen::Index rows, Eigen::Index cols, double stddev = 1.0) {
    Mat out(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = normal(0.0, stddev);
    return out;
  }
  Mat uniform_mat(Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
    Mat out(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = uniform(lo, hi);
    return out;
  }

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[index(i)]);
    return perm;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace efy
