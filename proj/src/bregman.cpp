#include "efy/bregman.hpp"

namespace efy {

BiconjugateResult biconjugate(const Energy& energy, const Regularizer& reg, const Vec& p,
                              std::span<const EnergyInput> v_grid, const SolverConfig& cfg) {
  return biconjugate_with([&](const EnergyInput& v, const Vec& q) { return energy.value(v, q); },
                          [&](const EnergyInput& v) { return conjugate(energy, reg, v, cfg).value; }, p, v_grid);
}

namespace {

double divergence_at(const Energy& energy, const Regularizer& reg, const Vec& p, const Vec& p_ref,
                     const EnergyInput& v_ref) {
  return reg.value(p) - energy.value(v_ref, p) - reg.value(p_ref) + energy.value(v_ref, p_ref);
}

}  // namespace

BregmanResult generalized_bregman(const Energy& energy, const Regularizer& reg, const Vec& p, const Vec& p_ref) {
  if (energy.kind() != Energy::Kind::Bilinear) {
    throw UnsupportedOperation("generalized_bregman: closed-form inner problem needs a bilinear energy");
  }
  const Mat& U = energy.coupling_matrix();
  if (U.rows() != U.cols()) throw UnsupportedOperation("generalized_bregman: bilinear U must be square");
  if (!reg.domain().contains(p) || !reg.domain().contains(p_ref)) {
    throw ContractViolation("generalized_bregman: points must lie in the output set");
  }
  const Vec grad = reg.gradient(p_ref);
  BregmanResult out;
  out.v_ref = Vec(U.transpose().partialPivLu().solve(grad));
  out.value = divergence_at(energy, reg, p, p_ref, out.v_ref);
  return out;
}

BregmanResult generalized_bregman(const Energy& energy, const Regularizer& reg, const Vec& p, const Vec& p_ref,
                                  std::span<const EnergyInput> v_grid, const SolverConfig& cfg) {
  if (v_grid.empty()) throw ContractViolation("generalized_bregman: empty v grid");
  if (!reg.domain().contains(p) || !reg.domain().contains(p_ref)) {
    throw ContractViolation("generalized_bregman: points must lie in the output set");
  }
  const BiconjugateResult inner = biconjugate(energy, reg, p_ref, v_grid, cfg);
  BregmanResult out;
  out.v_ref = v_grid[inner.best_index];
  out.value = divergence_at(energy, reg, p, p_ref, out.v_ref);
  return out;
}

double dual_generalized_bregman(const Energy& energy, const Regularizer& reg, const EnergyInput& v,
                                const EnergyInput& v_ref, const SolverConfig& cfg) {
  const ConjugateResult at_v = conjugate(energy, reg, v, cfg);
  const ConjugateResult at_ref = conjugate(energy, reg, v_ref, cfg);
  return at_v.value - energy.value(v, at_ref.argmax) - at_ref.value + energy.value(v_ref, at_ref.argmax);
}

}  // namespace efy
