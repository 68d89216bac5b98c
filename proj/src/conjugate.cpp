#include "efy/conjugate.hpp"

#include <cmath>

namespace efy {

void SolverConfig::validate() const {
  if (max_iters <= 0 || max_sweeps <= 0 || max_shrinks <= 0) {
    throw ContractViolation("SolverConfig: iteration limits must be positive");
  }
  if (!(tolerance > 0.0) || !(initial_step > 0.0) || !(sufficient_increase > 0.0)) {
    throw ContractViolation("SolverConfig: tolerance, initial_step and sufficient_increase must be positive");
  }
  if (!(shrink > 0.0 && shrink < 1.0)) throw ContractViolation("SolverConfig: shrink must lie in (0,1)");
}

SolverConfig SolverConfig::training() {
  SolverConfig cfg;
  cfg.tolerance = 1e-6;
  return cfg;
}

std::string status_name(SolverStatus::Kind kind) {
  switch (kind) {
    case SolverStatus::Kind::ClosedForm:
      return "closed_form";
    case SolverStatus::Kind::Converged:
      return "converged";
    case SolverStatus::Kind::MaxIters:
      return "max_iters";
    case SolverStatus::Kind::Stalled:
      return "stalled";
    case SolverStatus::Kind::LocalOnly:
      return "local_only";
  }
  return "unknown";
}

AscentResult projected_gradient_ascent(const std::function<double(const Vec&)>& objective,
                                       const std::function<Vec(const Vec&)>& gradient, const OutputSet& set,
                                       const Vec& start, const SolverConfig& cfg, double margin) {
  cfg.validate();
  auto project = [&](const Vec& p) { return set.project_interior(p, margin); };
  Vec p = project(start);
  double f = objective(p);
  Vec g = gradient(p);
  if (!std::isfinite(f) || !g.allFinite()) throw EvaluationError("projected_gradient_ascent: non-finite start");

  AscentResult out;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const double gap = (project(p + g) - p).norm();
    if (gap <= cfg.tolerance) {
      out.point = p;
      out.objective = f;
      out.status = {SolverStatus::Kind::Converged, it, gap};
      return out;
    }
    double step = cfg.initial_step;
    bool accepted = false;
    for (int s = 0; s < cfg.max_shrinks; ++s, step *= cfg.shrink) {
      const Vec candidate = project(p + step * g);
      const Vec delta = candidate - p;
      const double predicted = g.dot(delta);
      if (predicted <= 0.0) continue;
      const double fc = objective(candidate);
      if (!std::isfinite(fc)) continue;
      bool ok = fc - f >= cfg.sufficient_increase * predicted;
      Vec gc;
      if (std::abs(fc - f) <= 1e-13 * (1.0 + std::abs(f))) {
        // value difference is round-off; judge the step by the trapezoid estimate instead
        gc = gradient(candidate);
        ok = 0.5 * (g + gc).dot(delta) >= cfg.sufficient_increase * predicted;
      }
      if (ok) {
        p = candidate;
        f = fc;
        g = gc.size() == p.size() ? gc : gradient(p);
        accepted = true;
        break;
      }
    }
    if (!p.allFinite() || p.norm() > 1e12) {
      throw DivergenceError("projected_gradient_ascent: iterates diverged");
    }
    if (!accepted) {
      out.point = p;
      out.objective = f;
      out.status = {SolverStatus::Kind::Stalled, it, (project(p + g) - p).norm()};
      return out;
    }
  }
  if (!set.bounded()) {
    throw DivergenceError("projected_gradient_ascent: no maximizer reached within " +
                          std::to_string(cfg.max_iters) + " iterations on an unbounded set");
  }
  out.point = p;
  out.objective = f;
  out.status = {SolverStatus::Kind::MaxIters, cfg.max_iters, (project(p + g) - p).norm()};
  return out;
}

AscentResult coordinate_ascent_box_quadratic(const Vec& u, const Mat& U, const Regularizer& reg,
                                             const SolverConfig& cfg) {
  return coordinate_ascent_box_quadratic(u, U, reg, cfg, reg.domain().center());
}

AscentResult coordinate_ascent_box_quadratic(const Vec& u, const Mat& U, const Regularizer& reg,
                                             const SolverConfig& cfg, const Vec& start) {
  cfg.validate();
  const Eigen::Index k = u.size();
  if (U.rows() != k || U.cols() != k || reg.dim() != k || start.size() != k) {
    throw ContractViolation("coordinate_ascent_box_quadratic: shape mismatch");
  }
  if (!reg.separable()) {
    throw ContractViolation("coordinate_ascent_box_quadratic: regularizer must be separable over a box");
  }
  const double scale = 1.0 + (U.size() > 0 ? U.cwiseAbs().maxCoeff() : 0.0);
  if (!is_symmetric(U, 1e-12 * scale) || !is_negative_semidefinite(symmetric_part(U), kNsdTol * scale)) {
    throw ContractViolation("coordinate_ascent_box_quadratic: U must be symmetric negative semi-definite");
  }
  Vec p = reg.domain().project(start);
  AscentResult out;
  for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
    double change = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double r = u[j] + U.row(j).dot(p) - U(j, j) * p[j];
      const double next = reg.coordinate_argmax(j, r, std::min(U(j, j), 0.0));
      change = std::max(change, std::abs(next - p[j]));
      p[j] = next;
    }
    if (change <= cfg.tolerance) {
      out.point = p;
      out.objective = u.dot(p) + 0.5 * p.dot(U * p) - reg.value(p);
      out.status = {SolverStatus::Kind::Converged, sweep, change};
      return out;
    }
    out.status.gap = change;
  }
  out.point = p;
  out.objective = u.dot(p) + 0.5 * p.dot(U * p) - reg.value(p);
  out.status = {SolverStatus::Kind::MaxIters, cfg.max_sweeps, out.status.gap};
  return out;
}

namespace {

ConjugateResult finish(const Energy& energy, const Regularizer& reg, const EnergyInput& v, Vec argmax,
                       SolverStatus status, std::string solver) {
  ConjugateResult r;
  r.value = energy.value(v, argmax) - reg.value(argmax);
  r.argmax = std::move(argmax);
  r.envelope_grad = energy.grad_v(v, r.argmax);
  r.status = status;
  r.solver = std::move(solver);
  return r;
}

AscentResult run_pga(const Energy& energy, const Regularizer& reg, const EnergyInput& v, const SolverConfig& cfg,
                     const Vec& start) {
  auto objective = [&](const Vec& p) { return energy.value(v, p) - reg.value(p); };
  auto gradient = [&](const Vec& p) -> Vec { return energy.grad_p(v, p) - reg.gradient(p); };
  return projected_gradient_ascent(objective, gradient, reg.domain(), start, cfg, reg.interior_margin());
}

}  // namespace

ConjugateResult conjugate(const Energy& energy, const Regularizer& reg, const EnergyInput& v,
                          const SolverConfig& cfg) {
  energy.check_input(v);
  if (reg.dim() != energy.output_dim()) {
    throw ContractViolation("conjugate: regularizer dimension " + std::to_string(reg.dim()) +
                            " does not match energy output dimension " + std::to_string(energy.output_dim()));
  }
  const OutputSet& set = reg.domain();

  if (energy.linear_in_p() && reg.has_closed_form()) {
    const Vec c = energy.linear_coefficient(v);
    ConjugateResult r = finish(energy, reg, v, reg.closed_form_map(c), {}, "closed_form");
    return r;
  }

  if (energy.p_structure() == Energy::PStructure::QuadraticConcave) {
    const auto& q = std::get<QuadraticInput>(v);
    const Mat A = symmetric_part(q.A);
    if (set.kind() == OutputSet::Kind::Reals && reg.kind() == Regularizer::Kind::SquaredL2) {
      const Mat system = reg.gamma() * Mat::Identity(A.rows(), A.cols()) - A;
      Vec p;
      try {
        p = solve_spd(system, q.b);
      } catch (const SingularityError& e) {
        throw InfeasibleError(std::string("conjugate: gamma*I - A is not positive definite (") + e.what() + ")");
      }
      return finish(energy, reg, v, std::move(p), {}, "closed_form");
    }
    const double scale = 1.0 + A.cwiseAbs().maxCoeff();
    const bool nsd = is_negative_semidefinite(A, kNsdTol * scale);
    if (reg.separable() && nsd) {
      AscentResult a = coordinate_ascent_box_quadratic(q.b, A, reg, cfg);
      return finish(energy, reg, v, std::move(a.point), a.status, "coordinate_ascent");
    }
    AscentResult a = run_pga(energy, reg, v, cfg, set.kind() == OutputSet::Kind::Reals ? Vec(Vec::Zero(set.dim())) : set.center());
    if (max_eigenvalue(A) >= reg.strong_convexity() && !nsd) a.status.kind = SolverStatus::Kind::LocalOnly;
    return finish(energy, reg, v, std::move(a.point), a.status, "projected_gradient_ascent");
  }

  const Vec start = set.kind() == OutputSet::Kind::Reals ? Vec(Vec::Zero(set.dim())) : set.center();
  AscentResult a = run_pga(energy, reg, v, cfg, start);
  if (!energy.concave_in_p()) a.status.kind = SolverStatus::Kind::LocalOnly;
  return finish(energy, reg, v, std::move(a.point), a.status, "projected_gradient_ascent");
}

EnergyInput envelope_gradient(const Energy& energy, const Regularizer& /*reg*/, const EnergyInput& v,
                              const ConjugateResult& result) {
  return energy.grad_v(v, result.argmax);
}

std::vector<AscentResult> conjugate_restarts(const Energy& energy, const Regularizer& reg, const EnergyInput& v,
                                             const SolverConfig& cfg, int restarts, std::uint64_t seed) {
  const OutputSet& set = reg.domain();
  if (!set.bounded()) throw UnsupportedOperation("conjugate_restarts: needs a bounded output set");
  Rng rng(seed);
  std::vector<AscentResult> out;
  out.reserve(static_cast<std::size_t>(restarts));
  for (int r = 0; r < restarts; ++r) {
    Vec start;
    if (set.kind() == OutputSet::Kind::Box) {
      start.resize(set.dim());
      for (Eigen::Index j = 0; j < set.dim(); ++j) start[j] = rng.uniform(set.lower()[j], set.upper()[j]);
    } else {
      start = project_simplex(rng.uniform_vec(set.dim()));
    }
    AscentResult a = run_pga(energy, reg, v, cfg, start);
    if (!energy.concave_in_p()) a.status.kind = SolverStatus::Kind::LocalOnly;
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<Vec> box_grid(const OutputSet& box, double step) {
  if (box.kind() != OutputSet::Kind::Box) throw ContractViolation("box_grid: set must be a box");
  if (!(step > 0.0)) throw ContractViolation("box_grid: step must be positive");
  const Eigen::Index k = box.dim();
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(k));
  std::size_t total = 1;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double width = box.upper()[j] - box.lower()[j];
    counts[static_cast<std::size_t>(j)] = static_cast<Eigen::Index>(std::floor(width / step + 1e-9)) + 1;
    total *= static_cast<std::size_t>(counts[static_cast<std::size_t>(j)]);
  }
  if (total > 50'000'000) throw ContractViolation("box_grid: grid too large");
  std::vector<Vec> grid;
  grid.reserve(total);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(k), 0);
  for (std::size_t n = 0; n < total; ++n) {
    Vec p(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      p[j] = idx[jj] + 1 == counts[jj] ? box.upper()[j] : box.lower()[j] + step * static_cast<double>(idx[jj]);
    }
    grid.push_back(std::move(p));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      if (++idx[j] < counts[j]) break;
      idx[j] = 0;
    }
  }
  return grid;
}

}  // namespace efy
