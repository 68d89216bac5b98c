#include "efy/regularizer.hpp"

#include <algorithm>
#include <cmath>

namespace efy {

namespace {

double xlogx(double x) { return x <= 0.0 ? 0.0 : x * std::log(x); }

void require_positive_gamma(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw ContractViolation("regularizer: gamma must be positive and finite, got " +
                            std::to_string(gamma));
  }
}

bool inside_unit_box(const OutputSet& set) {
  return set.kind() == OutputSet::Kind::Box && (set.lower().array() >= 0.0).all() &&
         (set.upper().array() <= 1.0).all();
}

// argmax over t in (0,1) of r t + (c/2) t^2 - gamma [t log t + (1-t) log(1-t)], c <= 0.
// Stationarity r + c t = gamma logit(t); solved for s = logit(t) by safeguarded Newton.
double binary_entropy_root(double r, double c, double gamma) {
  double lo = (r + std::min(c, 0.0)) / gamma;
  double hi = r / gamma;
  auto h = [&](double s) { return r + c * sigmoid(s) - gamma * s; };
  double s = 0.5 * (lo + hi);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(s)); ++it) {
    const double hs = h(s);
    if (hs > 0.0) lo = s; else hi = s;
    const double sig = sigmoid(s);
    const double dh = c * sig * (1.0 - sig) - gamma;
    double next = s - hs / dh;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == s) break;
    s = next;
  }
  return sigmoid(s);
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double lse(const Vec& u, double gamma) {
  require_positive_gamma(gamma);
  const double shift = u.maxCoeff();
  return shift + gamma * std::log(((u.array() - shift) / gamma).exp().sum());
}

Vec softmax(const Vec& u, double gamma) {
  require_positive_gamma(gamma);
  const Vec e = ((u.array() - u.maxCoeff()) / gamma).exp().matrix();
  return e / e.sum();
}

Regularizer Regularizer::squared_l2(double gamma, OutputSet domain) {
  return make(Kind::SquaredL2, gamma, std::move(domain));
}
Regularizer Regularizer::shannon_binary(double gamma, Eigen::Index k) {
  return make(Kind::ShannonBinary, gamma, OutputSet::box01(k));
}
Regularizer Regularizer::gini_binary(double gamma, Eigen::Index k) {
  return make(Kind::GiniBinary, gamma, OutputSet::box01(k));
}
Regularizer Regularizer::shannon_simplex(double gamma, Eigen::Index k) {
  return make(Kind::ShannonSimplex, gamma, OutputSet::simplex(k));
}
Regularizer Regularizer::indicator(OutputSet domain) {
  return make(Kind::Indicator, 0.0, std::move(domain));
}

Regularizer Regularizer::make(Kind kind, double gamma, OutputSet domain) {
  switch (kind) {
    case Kind::SquaredL2:
      require_positive_gamma(gamma);
      if (domain.kind() == OutputSet::Kind::Simplex) {
        throw ContractViolation("squared_l2: simplex domain is not supported");
      }
      break;
    case Kind::ShannonBinary:
      require_positive_gamma(gamma);
      if (!inside_unit_box(domain)) throw ContractViolation("shannon_binary: domain must be a box inside [0,1]^k");
      break;
    case Kind::GiniBinary:
      require_positive_gamma(gamma);
      if (domain.kind() != OutputSet::Kind::Box) throw ContractViolation("gini_binary: domain must be a box");
      break;
    case Kind::ShannonSimplex:
      require_positive_gamma(gamma);
      if (domain.kind() != OutputSet::Kind::Simplex) throw ContractViolation("shannon_simplex: domain must be the simplex");
      break;
    case Kind::Indicator:
      gamma = 0.0;
      break;
  }
  return Regularizer(kind, gamma, std::move(domain));
}

Regularizer Regularizer::restricted_to(const OutputSet& smaller) const {
  if (smaller.dim() != dim()) throw ContractViolation("restricted_to: dimension mismatch");
  if (smaller.kind() == OutputSet::Kind::Box && domain_.kind() == OutputSet::Kind::Box) {
    if (!domain_.contains(smaller.lower()) || !domain_.contains(smaller.upper())) {
      throw ContractViolation("restricted_to: set is not contained in the domain");
    }
  } else if (smaller.kind() != domain_.kind() && domain_.kind() != OutputSet::Kind::Reals) {
    throw ContractViolation("restricted_to: unsupported restriction " + domain_.describe() + " -> " +
                            smaller.describe());
  }
  return make(kind_, gamma_, smaller);
}

std::string Regularizer::name() const { return regularizer_kind_name(kind_); }

double Regularizer::strong_convexity() const {
  switch (kind_) {
    case Kind::SquaredL2:
      return gamma_;
    case Kind::ShannonBinary:
      return 4.0 * gamma_;  // second derivative gamma / (p (1-p)) >= 4 gamma
    case Kind::GiniBinary:
      return 2.0 * gamma_;
    case Kind::ShannonSimplex:
      return gamma_;  // w.r.t. the l1 norm, hence also w.r.t. l2
    case Kind::Indicator:
      return 0.0;
  }
  return 0.0;
}

Norm Regularizer::strong_convexity_norm() const {
  return kind_ == Kind::ShannonSimplex ? Norm::L1 : Norm::L2;
}

double Regularizer::value(const Vec& p) const {
  if (p.size() != dim()) throw ContractViolation("Regularizer::value: dimension mismatch");
  if (!domain_.contains(p)) return kInf;
  switch (kind_) {
    case Kind::SquaredL2:
      return 0.5 * gamma_ * p.squaredNorm();
    case Kind::ShannonBinary: {
      double total = 0.0;
      for (Eigen::Index j = 0; j < p.size(); ++j) total += xlogx(p[j]) + xlogx(1.0 - p[j]);
      return gamma_ * total;
    }
    case Kind::GiniBinary:
      return gamma_ * (p.squaredNorm() - p.sum());
    case Kind::ShannonSimplex: {
      double total = 0.0;
      for (Eigen::Index j = 0; j < p.size(); ++j) total += xlogx(p[j]);
      return gamma_ * total;
    }
    case Kind::Indicator:
      return 0.0;
  }
  return kInf;
}

Vec Regularizer::gradient(const Vec& p) const {
  if (p.size() != dim()) throw ContractViolation("Regularizer::gradient: dimension mismatch");
  if (!domain_.contains(p)) throw ContractViolation("Regularizer::gradient: point outside the domain");
  switch (kind_) {
    case Kind::SquaredL2:
      return gamma_ * p;
    case Kind::ShannonBinary: {
      if ((p.array() <= 0.0).any() || (p.array() >= 1.0).any()) {
        throw DomainBoundaryError("shannon_binary: gradient undefined on the boundary of [0,1]^k");
      }
      return gamma_ * (p.array() / (1.0 - p.array())).log().matrix();
    }
    case Kind::GiniBinary:
      return gamma_ * (2.0 * p.array() - 1.0).matrix();
    case Kind::ShannonSimplex: {
      if ((p.array() <= 0.0).any()) {
        throw DomainBoundaryError("shannon_simplex: gradient undefined on the boundary of the simplex");
      }
      return gamma_ * (p.array().log() + 1.0).matrix();
    }
    case Kind::Indicator:
      return Vec::Zero(p.size());
  }
  return Vec::Zero(p.size());
}

bool Regularizer::has_closed_form() const {
  if (kind_ == Kind::Indicator) return domain_.kind() == OutputSet::Kind::Box;
  return true;
}

Vec Regularizer::closed_form_map(const Vec& u) const {
  if (u.size() != dim()) throw ContractViolation("closed_form_map: dimension mismatch");
  switch (kind_) {
    case Kind::SquaredL2:
      return domain_.project(u / gamma_);
    case Kind::ShannonBinary: {
      Vec p(u.size());
      for (Eigen::Index j = 0; j < u.size(); ++j) p[j] = sigmoid(u[j] / gamma_);
      return domain_.project(p);
    }
    case Kind::GiniBinary:
      return domain_.project(((u.array() + gamma_) / (2.0 * gamma_)).matrix());
    case Kind::ShannonSimplex:
      return softmax(u, gamma_);
    case Kind::Indicator: {
      if (domain_.kind() != OutputSet::Kind::Box) {
        throw UnsupportedOperation("closed_form_map: indicator over " + domain_.describe() +
                                   " has no closed form; use the iterative conjugate oracle");
      }
      Vec p(u.size());
      for (Eigen::Index j = 0; j < u.size(); ++j) p[j] = u[j] >= 0.0 ? domain_.upper()[j] : domain_.lower()[j];
      return p;
    }
  }
  return u;
}

double Regularizer::conjugate_value(const Vec& u) const {
  if (u.size() != dim()) throw ContractViolation("conjugate_value: dimension mismatch");
  const bool unit_box = domain_.kind() == OutputSet::Kind::Box && (domain_.lower().array() == 0.0).all() &&
                        (domain_.upper().array() == 1.0).all();
  switch (kind_) {
    case Kind::SquaredL2:
      if (domain_.kind() == OutputSet::Kind::Reals) return u.squaredNorm() / (2.0 * gamma_);
      break;
    case Kind::ShannonBinary:
      if (unit_box) {
        double total = 0.0;
        for (Eigen::Index j = 0; j < u.size(); ++j) total += softplus(u[j] / gamma_);
        return gamma_ * total;
      }
      break;
    case Kind::ShannonSimplex:
      return lse(u, gamma_);
    default:
      break;
  }
  const Vec p = closed_form_map(u);
  return u.dot(p) - value(p);
}

bool Regularizer::separable() const {
  return domain_.kind() == OutputSet::Kind::Box && kind_ != Kind::ShannonSimplex;
}

double Regularizer::coordinate_argmax(Eigen::Index j, double r, double curvature) const {
  if (!separable()) throw UnsupportedOperation("coordinate_argmax: regularizer is not separable over a box");
  if (curvature > 0.0) throw ContractViolation("coordinate_argmax: curvature must be <= 0");
  const double lo = domain_.lower()[j];
  const double hi = domain_.upper()[j];
  double t = 0.0;
  switch (kind_) {
    case Kind::SquaredL2:
      t = r / (gamma_ - curvature);
      break;
    case Kind::GiniBinary:
      t = (r + gamma_) / (2.0 * gamma_ - curvature);
      break;
    case Kind::ShannonBinary:
      t = binary_entropy_root(r, curvature, gamma_);
      break;
    case Kind::Indicator:
      if (curvature < 0.0) {
        t = -r / curvature;
      } else {
        t = r >= 0.0 ? hi : lo;
      }
      break;
    case Kind::ShannonSimplex:
      break;
  }
  return std::clamp(t, lo, hi);
}

double Regularizer::interior_margin() const {
  return (kind_ == Kind::ShannonBinary || kind_ == Kind::ShannonSimplex) ? 1e-12 : 0.0;
}

std::optional<Regularizer::Kind> regularizer_kind_from_name(const std::string& name) {
  using K = Regularizer::Kind;
  if (name == "squared_l2") return K::SquaredL2;
  if (name == "shannon_binary") return K::ShannonBinary;
  if (name == "gini_binary") return K::GiniBinary;
  if (name == "shannon_simplex") return K::ShannonSimplex;
  if (name == "indicator") return K::Indicator;
  return std::nullopt;
}

std::string regularizer_kind_name(Regularizer::Kind kind) {
  switch (kind) {
    case Regularizer::Kind::SquaredL2:
      return "squared_l2";
    case Regularizer::Kind::ShannonBinary:
      return "shannon_binary";
    case Regularizer::Kind::GiniBinary:
      return "gini_binary";
    case Regularizer::Kind::ShannonSimplex:
      return "shannon_simplex";
    case Regularizer::Kind::Indicator:
      return "indicator";
  }
  return "unknown";
}

}  // namespace efy
