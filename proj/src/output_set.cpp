#include "efy/output_set.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace efy {

OutputSet OutputSet::box01(Eigen::Index k) {
  return box(Vec::Zero(k), Vec::Ones(k));
}

OutputSet OutputSet::box(Vec lower, Vec upper) {
  if (lower.size() != upper.size()) throw ContractViolation("OutputSet::box: bound size mismatch");
  if ((upper.array() < lower.array()).any()) {
    throw ContractViolation("OutputSet::box: lower bound exceeds upper bound");
  }
  OutputSet set(Kind::Box, lower.size());
  set.lower_ = std::move(lower);
  set.upper_ = std::move(upper);
  return set;
}

OutputSet OutputSet::simplex(Eigen::Index k) {
  if (k < 1) throw ContractViolation("OutputSet::simplex: k must be positive");
  return OutputSet(Kind::Simplex, k);
}

OutputSet OutputSet::reals(Eigen::Index k) { return OutputSet(Kind::Reals, k); }

bool OutputSet::contains(const Vec& p, double tol) const {
  if (p.size() != dim_ || !p.allFinite()) return false;
  switch (kind_) {
    case Kind::Box:
      return ((p - lower_).array() >= -tol).all() && ((upper_ - p).array() >= -tol).all();
    case Kind::Simplex:
      return (p.array() >= -tol).all() && std::abs(p.sum() - 1.0) <= tol;
    case Kind::Reals:
      return true;
  }
  return false;
}

Vec OutputSet::project(const Vec& p) const { return project_interior(p, 0.0); }

Vec OutputSet::project_interior(const Vec& p, double margin) const {
  if (p.size() != dim_) throw ContractViolation("OutputSet::project: dimension mismatch");
  switch (kind_) {
    case Kind::Box: {
      const Vec lo = (lower_.array() + margin).min((lower_ + upper_).array() / 2.0);
      const Vec hi = (upper_.array() - margin).max((lower_ + upper_).array() / 2.0);
      return p.cwiseMax(lo).cwiseMin(hi);
    }
    case Kind::Simplex:
      return project_simplex(p, std::min(margin, 1.0 / static_cast<double>(dim_)));
    case Kind::Reals:
      return p;
  }
  return p;
}

Vec OutputSet::center() const { return project(Vec::Constant(dim_, 0.5)); }

std::string OutputSet::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Box:
      os << "box(" << dim_ << ")";
      break;
    case Kind::Simplex:
      os << "simplex(" << dim_ << ")";
      break;
    case Kind::Reals:
      os << "reals(" << dim_ << ")";
      break;
  }
  return os.str();
}

Vec project_simplex(const Vec& p, double floor) {
  const Eigen::Index k = p.size();
  const double mass = 1.0 - floor * static_cast<double>(k);
  // project p - floor onto {q >= 0, sum q = mass}, then shift back
  std::vector<double> sorted(p.data(), p.data() + k);
  for (double& s : sorted) s -= floor;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumsum = 0.0;
  double tau = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    cumsum += sorted[static_cast<std::size_t>(i)];
    const double candidate = (cumsum - mass) / static_cast<double>(i + 1);
    if (sorted[static_cast<std::size_t>(i)] - candidate > 0.0) tau = candidate;
  }
  return ((p.array() - floor - tau).max(0.0) + floor).matrix();
}

}  // namespace efy
