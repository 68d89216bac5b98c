#pragma once

#include <string>

#include "efy/numerics.hpp"

namespace efy {

/// Convex output set C. Boxes carry explicit bounds so that sub-boxes of
/// [0,1]^k can be expressed.
class OutputSet {
 public:
  enum class Kind { Box, Simplex, Reals };

  static OutputSet box01(Eigen::Index k);
  static OutputSet box(Vec lower, Vec upper);
  static OutputSet simplex(Eigen::Index k);
  static OutputSet reals(Eigen::Index k);

  Kind kind() const { return kind_; }
  Eigen::Index dim() const { return dim_; }
  bool bounded() const { return kind_ != Kind::Reals; }
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }

  bool contains(const Vec& p, double tol = 1e-9) const;
  /// Euclidean projection onto the set.
  Vec project(const Vec& p) const;
  /// Euclidean projection onto the set shrunk by `margin` (box: [lo+m, hi-m];
  /// simplex: entries >= m). Used by solvers whose regularizer is not
  /// differentiable on the boundary.
  Vec project_interior(const Vec& p, double margin) const;
  /// Deterministic starting point: projection of 0.5 * 1 onto the set.
  Vec center() const;

  std::string describe() const;

 private:
  OutputSet(Kind kind, Eigen::Index dim) : kind_(kind), dim_(dim) {}

  Kind kind_;
  Eigen::Index dim_;
  Vec lower_;
  Vec upper_;
};

/// Euclidean projection onto {p >= floor, sum p = 1} (sort-based).
Vec project_simplex(const Vec& p, double floor = 0.0);

}  // namespace efy
