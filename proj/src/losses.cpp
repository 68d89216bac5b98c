#include "efy/losses.hpp"

#include <algorithm>
#include <cmath>

namespace efy {

std::optional<LossKind> loss_kind_from_name(const std::string& name) {
  if (name == "gfy") return LossKind::Gfy;
  if (name == "perceptron") return LossKind::Perceptron;
  if (name == "energy") return LossKind::Energy;
  if (name == "xent") return LossKind::Xent;
  return std::nullopt;
}

std::string loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::Gfy:
      return "gfy";
    case LossKind::Perceptron:
      return "perceptron";
    case LossKind::Energy:
      return "energy";
    case LossKind::Xent:
      return "xent";
  }
  return "unknown";
}

namespace {

void require_label_in_set(const Regularizer& reg, const Vec& y) {
  if (!reg.domain().contains(y)) {
    throw ContractViolation("loss: label is not in the output set " + reg.domain().describe());
  }
}

// Central-difference Jacobian of p*(v) with respect to flatten(v); rows index v.
Mat argmax_jacobian(const Energy& energy, const Regularizer& reg, const EnergyInput& v, const SolverConfig& cfg) {
  const Vec flat = flatten(v);
  Mat jac(flat.size(), energy.output_dim());
  Vec probe = flat;
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    const double h = default_fd_step(flat[i]);
    probe[i] = flat[i] + h;
    const Vec up = conjugate(energy, reg, unflatten_like(v, probe), cfg).argmax;
    probe[i] = flat[i] - h;
    const Vec down = conjugate(energy, reg, unflatten_like(v, probe), cfg).argmax;
    probe[i] = flat[i];
    jac.row(i) = ((up - down) / (2.0 * h)).transpose();
  }
  return jac;
}

}  // namespace

LossEval gfy_loss(const Energy& energy, const Regularizer& reg, const EnergyInput& v, const Vec& y,
                  const SolverConfig& cfg, GradientPath path) {
  require_label_in_set(reg, y);
  ConjugateResult conj = conjugate(energy, reg, v, cfg);
  LossEval out;
  out.value = conj.value + reg.value(y) - energy.value(v, y);
  const EnergyInput conj_grad =
      path == GradientPath::Envelope ? conj.envelope_grad : conjugate_gradient_through_argmax(energy, reg, v, cfg);
  out.grad_v = add_scaled(conj_grad, energy.grad_v(v, y), -1.0);
  out.conjugate = std::move(conj);
  return out;
}

LossEval perceptron_loss(const Energy& energy, const OutputSet& set, const EnergyInput& v, const Vec& y,
                         const SolverConfig& cfg) {
  return gfy_loss(energy, Regularizer::indicator(set), v, y, cfg);
}

LossEval energy_loss(const Energy& energy, const EnergyInput& v, const Vec& y) {
  LossEval out;
  out.value = -energy.value(v, y);
  out.grad_v = add_scaled(zeros_like(v), energy.grad_v(v, y), -1.0);
  return out;
}

LossEval xent_loss(const Energy& energy, const Regularizer& reg, const EnergyInput& v, const Vec& y,
                   const SolverConfig& cfg) {
  require_label_in_set(reg, y);
  constexpr double kClamp = 1e-6;
  auto bce = [&](const Vec& p) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < p.size(); ++j) {
      const double q = std::clamp(p[j], kClamp, 1.0 - kClamp);
      total -= y[j] * std::log(q) + (1.0 - y[j]) * std::log(1.0 - q);
    }
    return total;
  };
  ConjugateResult conj = conjugate(energy, reg, v, cfg);
  LossEval out;
  out.value = bce(conj.argmax);
  const Vec flat = flatten(v);
  auto through_argmax = [&](const Vec& w) { return bce(conjugate(energy, reg, unflatten_like(v, w), cfg).argmax); };
  out.grad_v = unflatten_like(v, finite_diff_grad(through_argmax, flat));
  out.conjugate = std::move(conj);
  return out;
}

LossEval evaluate_loss(LossKind kind, const Energy& energy, const Regularizer& reg, const EnergyInput& v,
                       const Vec& y, const SolverConfig& cfg) {
  switch (kind) {
    case LossKind::Gfy:
      return gfy_loss(energy, reg, v, y, cfg);
    case LossKind::Perceptron:
      return perceptron_loss(energy, reg.domain(), v, y, cfg);
    case LossKind::Energy:
      return energy_loss(energy, v, y);
    case LossKind::Xent:
      return xent_loss(energy, reg, v, y, cfg);
  }
  throw ContractViolation("evaluate_loss: unknown loss kind");
}

double fy_loss(const Regularizer& reg, const Vec& c, const Vec& p) {
  return reg.conjugate_value(c) + reg.value(p) - c.dot(p);
}

double linearized_fy_upper_bound(const Energy& energy, const Regularizer& reg, const EnergyInput& v, const Vec& p) {
  if (!energy.concave_in_p()) {
    throw ContractViolation("linearized_fy_upper_bound: energy must be concave in p");
  }
  return fy_loss(reg, energy.grad_p(v, p), p);
}

EnergyInput conjugate_gradient_through_argmax(const Energy& energy, const Regularizer& reg, const EnergyInput& v,
                                              const SolverConfig& cfg) {
  const ConjugateResult conj = conjugate(energy, reg, v, cfg);
  const Vec& p = conj.argmax;
  const Mat jac = argmax_jacobian(energy, reg, v, cfg);
  const Vec inner = energy.grad_p(v, p) - reg.gradient(p);
  return unflatten_like(v, flatten(energy.grad_v(v, p)) + jac * inner);
}

}  // namespace efy
