#pragma once

#include <span>

#include "efy/conjugate.hpp"
#include "efy/energy.hpp"
#include "efy/regularizer.hpp"

namespace efy {

/// Omega^{Phi Psi}(p) = max_{v in grid} Phi(v, p) - Omega^Phi(v), with the
/// maximization over the left argument restricted to a finite grid.
/// Never exceeds Omega(p).
struct BiconjugateResult {
  double value = 0.0;
  std::size_t best_index = 0;
};

BiconjugateResult biconjugate(const Energy& energy, const Regularizer& reg, const Vec& p,
                              std::span<const EnergyInput> v_grid, const SolverConfig& cfg = {});

/// Same maximization for arbitrary callables phi(v, p) and conj(v).
template <typename Phi, typename Conj, typename V>
BiconjugateResult biconjugate_with(Phi&& phi, Conj&& conj, const Vec& p, std::span<const V> v_grid) {
  if (v_grid.empty()) throw ContractViolation("biconjugate: empty v grid");
  BiconjugateResult out;
  out.value = -kInf;
  for (std::size_t i = 0; i < v_grid.size(); ++i) {
    const double value = phi(v_grid[i], p) - conj(v_grid[i]);
    if (value > out.value) {
      out.value = value;
      out.best_index = i;
    }
  }
  return out;
}

struct BregmanResult {
  double value = 0.0;
  /// v' = argmax_v Phi(v, p_ref) - Omega^Phi(v)
  EnergyInput v_ref;
};

/// D(p, p_ref) = Omega(p) - Phi(v', p) - Omega(p_ref) + Phi(v', p_ref).
/// Closed-form inner problem for a bilinear energy with square invertible U:
/// U^T v' = grad Omega(p_ref).
BregmanResult generalized_bregman(const Energy& energy, const Regularizer& reg, const Vec& p, const Vec& p_ref);

/// Same divergence with v' chosen from a finite candidate set.
BregmanResult generalized_bregman(const Energy& energy, const Regularizer& reg, const Vec& p, const Vec& p_ref,
                                  std::span<const EnergyInput> v_grid, const SolverConfig& cfg = {});

/// Divergence between two energy inputs:
/// Omega^Phi(v) - Phi(v, p*(v')) - Omega^Phi(v') + Phi(v', p*(v')).
double dual_generalized_bregman(const Energy& energy, const Regularizer& reg, const EnergyInput& v,
                                const EnergyInput& v_ref, const SolverConfig& cfg = {});

}  // namespace efy
