#pragma once

#include <limits>
#include <optional>
#include <string>

#include "efy/numerics.hpp"
#include "efy/output_set.hpp"

namespace efy {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Norm with respect to which a regularizer's strong-convexity modulus is stated.
enum class Norm { L1, L2 };

/// Regularization function Omega: C -> R (+inf outside C).
///
/// Kinds and their per-coordinate forms (gamma > 0):
///   squared_l2      (gamma/2) ||p||^2                      over R^k or a box
///   shannon_binary  gamma [p log p + (1-p) log(1-p)]       over a box inside [0,1]^k
///   gini_binary     gamma (p^2 - p)                        over a box
///   shannon_simplex gamma <p, log p>                       over the simplex
///   indicator       0                                      over any set
class Regularizer {
 public:
  enum class Kind { SquaredL2, ShannonBinary, GiniBinary, ShannonSimplex, Indicator };

  static Regularizer squared_l2(double gamma, OutputSet domain);
  static Regularizer shannon_binary(double gamma, Eigen::Index k);
  static Regularizer gini_binary(double gamma, Eigen::Index k);
  static Regularizer shannon_simplex(double gamma, Eigen::Index k);
  static Regularizer indicator(OutputSet domain);
  /// Generic constructor; validates the kind/domain pairing.
  static Regularizer make(Kind kind, double gamma, OutputSet domain);

  /// Same kind and gamma restricted to a smaller box.
  Regularizer restricted_to(const OutputSet& smaller) const;

  Kind kind() const { return kind_; }
  double gamma() const { return gamma_; }
  const OutputSet& domain() const { return domain_; }
  Eigen::Index dim() const { return domain_.dim(); }
  std::string name() const;

  /// Strong-convexity modulus of the whole function w.r.t. strong_convexity_norm().
  double strong_convexity() const;
  Norm strong_convexity_norm() const;

  /// Omega(p); +inf outside the domain. Entropies use 0 log 0 = 0.
  double value(const Vec& p) const;
  /// Gradient on the domain. Entropies throw DomainBoundaryError on the boundary.
  Vec gradient(const Vec& p) const;

  /// Whether argmax_{p in C} <u,p> - Omega(p) has a closed form.
  bool has_closed_form() const;
  /// p_Omega(u) = argmax_{p in C} <u,p> - Omega(p).
  Vec closed_form_map(const Vec& u) const;
  /// Omega^*(u) = max_{p in C} <u,p> - Omega(p).
  double conjugate_value(const Vec& u) const;

  /// Separable over coordinates of a box domain.
  bool separable() const;
  /// argmax over t in [lo_j, hi_j] of r t + (curvature/2) t^2 - Omega_j(t), for
  /// curvature <= 0. Requires separable().
  double coordinate_argmax(Eigen::Index j, double r, double curvature) const;

  /// Margin kept from the boundary by iterative solvers (nonzero for entropies).
  double interior_margin() const;

 private:
  Regularizer(Kind kind, double gamma, OutputSet domain)
      : kind_(kind), gamma_(gamma), domain_(std::move(domain)) {}

  Kind kind_;
  double gamma_;
  OutputSet domain_;
};

std::optional<Regularizer::Kind> regularizer_kind_from_name(const std::string& name);
std::string regularizer_kind_name(Regularizer::Kind kind);

/// gamma * log sum exp(u / gamma), max-shifted.
double lse(const Vec& u, double gamma);
/// softmax(u / gamma).
Vec softmax(const Vec& u, double gamma);
double sigmoid(double x);
/// log(1 + exp(x)) without overflow.
double softplus(double x);

}  // namespace efy
