#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "efy/energy.hpp"
#include "efy/numerics.hpp"
#include "efy/output_set.hpp"
#include "efy/regularizer.hpp"

namespace efy {

struct SolverConfig {
  int max_iters = 10000;
  /// Projected-gradient norm (PGA) or max coordinate change (coordinate ascent).
  double tolerance = 1e-8;
  double initial_step = 1.0;
  double shrink = 0.5;
  double sufficient_increase = 1e-4;
  int max_shrinks = 50;
  int max_sweeps = 10000;

  /// Throws ContractViolation unless every field is in range.
  void validate() const;
  /// Looser settings used inside training loops.
  static SolverConfig training();
};

struct SolverStatus {
  enum class Kind { ClosedForm, Converged, MaxIters, Stalled, LocalOnly };
  Kind kind = Kind::ClosedForm;
  int iterations = 0;
  double gap = 0.0;
};

std::string status_name(SolverStatus::Kind kind);

/// Omega^Phi(v), its maximizer and the envelope gradient.
struct ConjugateResult {
  double value = 0.0;
  Vec argmax;
  EnergyInput envelope_grad;
  SolverStatus status;
  std::string solver;
};

struct AscentResult {
  Vec point;
  double objective = 0.0;
  SolverStatus status;
};

/// Omega^Phi(v) = max_{p in C} Phi(v, p) - Omega(p). Dispatch: closed forms
/// (linear-in-p energies, linear-quadratic over R^k with squared_l2) first,
/// then coordinate ascent (quadratic energy, separable regularizer on a box),
/// then projected gradient ascent.
ConjugateResult conjugate(const Energy& energy, const Regularizer& reg, const EnergyInput& v,
                          const SolverConfig& cfg = {});

/// Projected gradient ascent with Armijo backtracking. The projection keeps
/// `margin` away from the boundary. Throws DivergenceError when no maximizer
/// is reached on an unbounded set.
AscentResult projected_gradient_ascent(const std::function<double(const Vec&)>& objective,
                                       const std::function<Vec(const Vec&)>& gradient, const OutputSet& set,
                                       const Vec& start, const SolverConfig& cfg, double margin = 0.0);

/// Cyclic coordinate ascent on <u,p> + 1/2 <p, U p> - Omega(p) over a box,
/// with the closed-form per-coordinate update of the separable regularizer.
/// U must be symmetric negative semi-definite.
AscentResult coordinate_ascent_box_quadratic(const Vec& u, const Mat& U, const Regularizer& reg,
                                             const SolverConfig& cfg);
AscentResult coordinate_ascent_box_quadratic(const Vec& u, const Mat& U, const Regularizer& reg,
                                             const SolverConfig& cfg, const Vec& start);

/// grad Omega^Phi(v) = grad_1 Phi(v, p*) evaluated at the stored maximizer.
EnergyInput envelope_gradient(const Energy& energy, const Regularizer& reg, const EnergyInput& v,
                              const ConjugateResult& result);

/// PGA from `restarts` uniform random starting points; diagnostics for
/// nonconcave energies.
std::vector<AscentResult> conjugate_restarts(const Energy& energy, const Regularizer& reg, const EnergyInput& v,
                                             const SolverConfig& cfg, int restarts, std::uint64_t seed);

/// Regular grid over a bounded box with the given step (endpoints included).
std::vector<Vec> box_grid(const OutputSet& box, double step);

/// C-transform Lambda_C(v) = min_{p in grid} cost(v, p) - lambda(p).
template <typename Lambda, typename Cost, typename V>
double c_transform(Lambda&& lambda, Cost&& cost, const V& v, std::span<const Vec> grid) {
  if (grid.empty()) throw ContractViolation("c_transform: empty grid");
  double best = std::numeric_limits<double>::infinity();
  for (const Vec& p : grid) best = std::min(best, cost(v, p) - lambda(p));
  return best;
}

/// max_{p in grid} phi(v, p) - omega(p), with the maximizing grid point.
struct GridMax {
  double value = -std::numeric_limits<double>::infinity();
  Vec argmax;
};

template <typename Phi, typename Omega, typename V>
GridMax grid_conjugate(Phi&& phi, Omega&& omega, const V& v, std::span<const Vec> grid) {
  if (grid.empty()) throw ContractViolation("grid_conjugate: empty grid");
  GridMax out;
  for (const Vec& p : grid) {
    const double value = phi(v, p) - omega(p);
    if (value > out.value) {
      out.value = value;
      out.argmax = p;
    }
  }
  return out;
}

}  // namespace efy
