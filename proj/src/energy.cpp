#include "efy/energy.hpp"

#include <cmath>

#include "efy/regularizer.hpp"

namespace efy {

namespace {

Vec flatten_prior(const PriorWeights& w) {
  Vec out(w.W1.size() + w.b1.size() + w.w2.size() + 1);
  Eigen::Index at = 0;
  out.segment(at, w.W1.size()) = w.W1.reshaped();
  at += w.W1.size();
  out.segment(at, w.b1.size()) = w.b1;
  at += w.b1.size();
  out.segment(at, w.w2.size()) = w.w2;
  at += w.w2.size();
  out[at] = w.b2;
  return out;
}

double activation(PriorActivation act, double z) {
  return act == PriorActivation::Softplus ? softplus(z) : std::max(z, 0.0);
}

double activation_grad(PriorActivation act, double z) {
  return act == PriorActivation::Softplus ? sigmoid(z) : (z > 0.0 ? 1.0 : 0.0);
}

Eigen::Index argmax_lowest(const Vec& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

Vec flatten(const EnergyInput& v) {
  return std::visit(
      [](const auto& x) -> Vec {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Vec>) {
          return x;
        } else if constexpr (std::is_same_v<T, QuadraticInput>) {
          Vec out(x.A.size() + x.b.size());
          out << x.A.reshaped(), x.b;
          return out;
        } else {
          const Vec prior = flatten_prior(x.prior);
          Vec out(x.u.size() + prior.size());
          out << x.u, prior;
          return out;
        }
      },
      v);
}

EnergyInput unflatten_like(const EnergyInput& like, const Vec& flat) {
  if (flat.size() != flatten(like).size()) throw ContractViolation("unflatten_like: size mismatch");
  return std::visit(
      [&](const auto& x) -> EnergyInput {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Vec>) {
          return flat;
        } else if constexpr (std::is_same_v<T, QuadraticInput>) {
          QuadraticInput out;
          out.A = flat.head(x.A.size()).reshaped(x.A.rows(), x.A.cols());
          out.b = flat.tail(x.b.size());
          return out;
        } else {
          SpenInput out;
          Eigen::Index at = 0;
          out.u = flat.segment(at, x.u.size());
          at += x.u.size();
          out.prior.W1 = flat.segment(at, x.prior.W1.size()).reshaped(x.prior.W1.rows(), x.prior.W1.cols());
          at += x.prior.W1.size();
          out.prior.b1 = flat.segment(at, x.prior.b1.size());
          at += x.prior.b1.size();
          out.prior.w2 = flat.segment(at, x.prior.w2.size());
          at += x.prior.w2.size();
          out.prior.b2 = flat[at];
          return out;
        }
      },
      like);
}

EnergyInput zeros_like(const EnergyInput& like) {
  return unflatten_like(like, Vec::Zero(flatten(like).size()));
}

EnergyInput add_scaled(const EnergyInput& a, const EnergyInput& b, double scale) {
  if (a.index() != b.index()) throw ContractViolation("add_scaled: mismatched input kinds");
  return unflatten_like(a, flatten(a) + scale * flatten(b));
}

Energy Energy::bilinear(Mat U) {
  Energy e(Kind::Bilinear, U.cols());
  e.d_ = U.rows();
  e.U_ = std::move(U);
  return e;
}

Energy Energy::linear_quadratic(Eigen::Index k) { return Energy(Kind::LinearQuadratic, k); }

Energy Energy::pairwise_multilabel(Eigen::Index k) { return Energy(Kind::PairwiseMultilabel, k); }

Energy Energy::rectifier(Mat U) {
  if ((U.array() < 0.0).any()) {
    throw ContractViolation("rectifier energy: U must be elementwise nonnegative");
  }
  Energy e(Kind::Rectifier, U.cols());
  e.d_ = U.rows();
  e.U_ = std::move(U);
  return e;
}

Energy Energy::maxout(Eigen::Index d) {
  Energy e(Kind::Maxout, 1);
  e.d_ = d;
  return e;
}

Energy Energy::lse_net(Eigen::Index d, double gamma) {
  if (!(gamma > 0.0)) throw ContractViolation("lse_net energy: gamma must be positive");
  Energy e(Kind::LseNet, 1);
  e.d_ = d;
  e.lse_gamma_ = gamma;
  return e;
}

Energy Energy::spen(Eigen::Index k, Eigen::Index prior_hidden, bool input_concave, PriorActivation activation) {
  if (prior_hidden < 1) throw ContractViolation("spen energy: prior network needs at least one hidden unit");
  Energy e(Kind::Spen, k);
  e.prior_hidden_ = prior_hidden;
  e.input_concave_ = input_concave;
  e.activation_ = activation;
  return e;
}

std::string Energy::name() const { return energy_kind_name(kind_); }

Energy::PStructure Energy::p_structure() const {
  switch (kind_) {
    case Kind::LinearQuadratic:
    case Kind::PairwiseMultilabel:
      return PStructure::QuadraticConcave;
    case Kind::Spen:
      return input_concave_ ? PStructure::Concave : PStructure::Nonconcave;
    default:
      return PStructure::Linear;
  }
}

Energy::VStructure Energy::v_structure() const {
  switch (kind_) {
    case Kind::Bilinear:
    case Kind::LinearQuadratic:
    case Kind::PairwiseMultilabel:
      return VStructure::Linear;
    case Kind::Rectifier:
    case Kind::Maxout:
    case Kind::LseNet:
      return VStructure::Convex;
    case Kind::Spen:
      return VStructure::Nonconvex;
  }
  return VStructure::Nonconvex;
}

void Energy::check_input(const EnergyInput& v) const {
  switch (kind_) {
    case Kind::Bilinear:
    case Kind::Rectifier:
    case Kind::Maxout:
    case Kind::LseNet: {
      const Vec* x = std::get_if<Vec>(&v);
      if (x == nullptr || x->size() != d_) {
        throw ContractViolation(name() + ": expected a vector input of size " + std::to_string(d_));
      }
      return;
    }
    case Kind::LinearQuadratic:
    case Kind::PairwiseMultilabel: {
      const auto* q = std::get_if<QuadraticInput>(&v);
      if (q == nullptr || q->A.rows() != k_ || q->A.cols() != k_ || q->b.size() != k_) {
        throw ContractViolation(name() + ": expected a quadratic input of dimension " + std::to_string(k_));
      }
      return;
    }
    case Kind::Spen: {
      const auto* s = std::get_if<SpenInput>(&v);
      if (s == nullptr || s->u.size() != k_ || s->prior.W1.rows() != prior_hidden_ || s->prior.W1.cols() != k_ ||
          s->prior.b1.size() != prior_hidden_ || s->prior.w2.size() != prior_hidden_) {
        throw ContractViolation("spen: input shape does not match (k=" + std::to_string(k_) +
                                ", hidden=" + std::to_string(prior_hidden_) + ")");
      }
      return;
    }
  }
}

double Energy::prior_value(const PriorWeights& w, const Vec& p) const {
  const Vec z = w.W1 * p + w.b1;
  double total = w.b2;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double weight = input_concave_ ? softplus(w.w2[i]) : w.w2[i];
    total += weight * activation(activation_, z[i]);
  }
  return total;
}

double Energy::value(const EnergyInput& v, const Vec& p) const {
  check_input(v);
  if (p.size() != k_) throw ContractViolation(name() + ": p has the wrong dimension");
  switch (kind_) {
    case Kind::Bilinear:
      return std::get<Vec>(v).dot(U_ * p);
    case Kind::Rectifier:
      return std::get<Vec>(v).cwiseMax(0.0).dot(U_ * p);
    case Kind::Maxout:
      return p[0] * std::get<Vec>(v).maxCoeff();
    case Kind::LseNet:
      return p[0] * lse(std::get<Vec>(v), lse_gamma_);
    case Kind::LinearQuadratic:
    case Kind::PairwiseMultilabel: {
      const auto& q = std::get<QuadraticInput>(v);
      return 0.5 * p.dot(q.A * p) + p.dot(q.b);
    }
    case Kind::Spen: {
      const auto& s = std::get<SpenInput>(v);
      return s.u.dot(p) - prior_value(s.prior, p);
    }
  }
  return 0.0;
}

Vec Energy::linear_coefficient(const EnergyInput& v) const {
  check_input(v);
  switch (kind_) {
    case Kind::Bilinear:
      return U_.transpose() * std::get<Vec>(v);
    case Kind::Rectifier:
      return U_.transpose() * std::get<Vec>(v).cwiseMax(0.0);
    case Kind::Maxout:
      return Vec::Constant(1, std::get<Vec>(v).maxCoeff());
    case Kind::LseNet:
      return Vec::Constant(1, lse(std::get<Vec>(v), lse_gamma_));
    default:
      throw UnsupportedOperation(name() + " is not linear in p");
  }
}

Vec Energy::grad_p(const EnergyInput& v, const Vec& p) const {
  check_input(v);
  if (p.size() != k_) throw ContractViolation(name() + ": p has the wrong dimension");
  switch (kind_) {
    case Kind::LinearQuadratic:
    case Kind::PairwiseMultilabel: {
      const auto& q = std::get<QuadraticInput>(v);
      return 0.5 * (q.A + q.A.transpose()) * p + q.b;
    }
    case Kind::Spen: {
      const auto& s = std::get<SpenInput>(v);
      const Vec z = s.prior.W1 * p + s.prior.b1;
      Vec back(z.size());
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double weight = input_concave_ ? softplus(s.prior.w2[i]) : s.prior.w2[i];
        back[i] = weight * activation_grad(activation_, z[i]);
      }
      return s.u - s.prior.W1.transpose() * back;
    }
    default:
      return linear_coefficient(v);
  }
}

EnergyInput Energy::grad_v(const EnergyInput& v, const Vec& p) const {
  check_input(v);
  if (p.size() != k_) throw ContractViolation(name() + ": p has the wrong dimension");
  switch (kind_) {
    case Kind::Bilinear:
      return Vec(U_ * p);
    case Kind::Rectifier: {
      const Vec& x = std::get<Vec>(v);
      const Vec up = U_ * p;
      return Vec((x.array() > 0.0).select(up, 0.0));
    }
    case Kind::Maxout: {
      const Vec& x = std::get<Vec>(v);
      Vec g = Vec::Zero(x.size());
      g[argmax_lowest(x)] = p[0];
      return g;
    }
    case Kind::LseNet:
      return Vec(p[0] * softmax(std::get<Vec>(v), lse_gamma_));
    case Kind::LinearQuadratic:
    case Kind::PairwiseMultilabel: {
      QuadraticInput g;
      g.A = 0.5 * p * p.transpose();
      g.b = p;
      return g;
    }
    case Kind::Spen: {
      const auto& s = std::get<SpenInput>(v);
      const Vec z = s.prior.W1 * p + s.prior.b1;
      SpenInput g;
      g.u = p;
      g.prior.w2.resize(z.size());
      Vec back(z.size());
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double act = activation(activation_, z[i]);
        const double weight = input_concave_ ? softplus(s.prior.w2[i]) : s.prior.w2[i];
        const double dweight = input_concave_ ? sigmoid(s.prior.w2[i]) : 1.0;
        g.prior.w2[i] = -act * dweight;
        back[i] = weight * activation_grad(activation_, z[i]);
      }
      g.prior.b1 = -back;
      g.prior.W1 = -back * p.transpose();
      g.prior.b2 = -1.0;
      return g;
    }
  }
  return zeros_like(v);
}

std::optional<Energy::Kind> energy_kind_from_name(const std::string& name) {
  using K = Energy::Kind;
  if (name == "bilinear") return K::Bilinear;
  if (name == "linear_quadratic") return K::LinearQuadratic;
  if (name == "pairwise") return K::PairwiseMultilabel;
  if (name == "rectifier") return K::Rectifier;
  if (name == "maxout") return K::Maxout;
  if (name == "lse_net") return K::LseNet;
  if (name == "spen") return K::Spen;
  return std::nullopt;
}

std::string energy_kind_name(Energy::Kind kind) {
  switch (kind) {
    case Energy::Kind::Bilinear:
      return "bilinear";
    case Energy::Kind::LinearQuadratic:
      return "linear_quadratic";
    case Energy::Kind::PairwiseMultilabel:
      return "pairwise";
    case Energy::Kind::Rectifier:
      return "rectifier";
    case Energy::Kind::Maxout:
      return "maxout";
    case Energy::Kind::LseNet:
      return "lse_net";
    case Energy::Kind::Spen:
      return "spen";
  }
  return "unknown";
}

double quadratic_joint_smoothness(const Mat& A) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(symmetric_part(A), Eigen::EigenvaluesOnly);
  const double rho = eig.eigenvalues().cwiseAbs().maxCoeff();
  return 0.5 * (rho + std::sqrt(rho * rho + 4.0));
}

}  // namespace efy
