#pragma once

#include <optional>
#include <string>

#include "efy/conjugate.hpp"
#include "efy/energy.hpp"
#include "efy/regularizer.hpp"

namespace efy {

enum class LossKind { Gfy, Perceptron, Energy, Xent };

std::optional<LossKind> loss_kind_from_name(const std::string& name);
std::string loss_kind_name(LossKind kind);

/// How the gradient of the conjugate term is obtained.
enum class GradientPath {
  /// grad_1 Phi(v, p*) at the maximizer.
  Envelope,
  /// Chain rule through a finite-difference Jacobian of the maximizer.
  ArgmaxFiniteDifference,
};

struct LossEval {
  double value = 0.0;
  EnergyInput grad_v;
  std::optional<ConjugateResult> conjugate;
};

/// L(v, y) = Omega^Phi(v) + Omega(y) - Phi(v, y) and its gradient in v.
LossEval gfy_loss(const Energy& energy, const Regularizer& reg, const EnergyInput& v, const Vec& y,
                  const SolverConfig& cfg = {}, GradientPath path = GradientPath::Envelope);

/// max_{p in C} Phi(v, p) - Phi(v, y), i.e. gfy_loss with the indicator of C.
LossEval perceptron_loss(const Energy& energy, const OutputSet& set, const EnergyInput& v, const Vec& y,
                         const SolverConfig& cfg = {});

/// -Phi(v, y) with gradient -grad_1 Phi(v, y).
LossEval energy_loss(const Energy& energy, const EnergyInput& v, const Vec& y);

/// Binary cross-entropy of the maximizer p^Phi_Omega(v) against y, with the
/// gradient taken by central differences through the maximizer.
LossEval xent_loss(const Energy& energy, const Regularizer& reg, const EnergyInput& v, const Vec& y,
                   const SolverConfig& cfg = {});

/// Dispatch on LossKind. The perceptron loss uses the indicator of reg's domain.
LossEval evaluate_loss(LossKind kind, const Energy& energy, const Regularizer& reg, const EnergyInput& v,
                       const Vec& y, const SolverConfig& cfg = {});

/// Regular Fenchel-Young loss L_Omega(c, p) = Omega^*(c) + Omega(p) - <c, p>.
double fy_loss(const Regularizer& reg, const Vec& c, const Vec& p);

/// L_Omega(grad_2 Phi(v, p), p); an upper bound on gfy_loss(v, p) when Phi is concave in p.
double linearized_fy_upper_bound(const Energy& energy, const Regularizer& reg, const EnergyInput& v, const Vec& p);

/// Gradient of Omega^Phi obtained by differentiating through the maximizer:
/// grad_1 Phi(v, p*) + J^T (grad_2 Phi(v, p*) - grad Omega(p*)), with J the
/// central-difference Jacobian of p*(v).
EnergyInput conjugate_gradient_through_argmax(const Energy& energy, const Regularizer& reg, const EnergyInput& v,
                                              const SolverConfig& cfg = {});

}  // namespace efy
