#include "efy/model.hpp"

#include <algorithm>
#include <cmath>

namespace efy {

std::optional<Architecture> architecture_from_name(const std::string& name) {
  if (name == "unary") return Architecture::Unary;
  if (name == "pairwise") return Architecture::Pairwise;
  if (name == "spen") return Architecture::Spen;
  return std::nullopt;
}

std::string architecture_name(Architecture arch) {
  switch (arch) {
    case Architecture::Unary:
      return "unary";
    case Architecture::Pairwise:
      return "pairwise";
    case Architecture::Spen:
      return "spen";
  }
  return "unknown";
}

Eigen::Index default_hidden_width(Eigen::Index input_dim) {
  return std::max<Eigen::Index>(1, std::min<Eigen::Index>(100, input_dim / 3));
}

ModelSpec resolve_spec(ModelSpec spec) {
  if (spec.input_dim < 1 || spec.num_labels < 1) {
    throw ContractViolation("model: input_dim and num_labels must be positive");
  }
  if (spec.hidden < 0 || spec.prior_hidden < 0) throw ContractViolation("model: widths must be nonnegative");
  if (spec.hidden == 0) spec.hidden = default_hidden_width(spec.input_dim);
  if (spec.prior_hidden == 0) spec.prior_hidden = spec.hidden;
  return spec;
}

namespace {

Mat uniform_init(Rng& rng, Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in) {
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return rng.uniform_mat(rows, cols, -s, s);
}

Vec relu(const Vec& z) { return z.cwiseMax(0.0); }

}  // namespace

ModelParams init_params(const ModelSpec& raw_spec, std::uint64_t seed) {
  ModelParams params;
  params.spec = resolve_spec(raw_spec);
  params.seed = seed;
  const auto& s = params.spec;
  Rng rng(seed);
  params.unary.W1 = uniform_init(rng, s.hidden, s.input_dim, s.input_dim);
  params.unary.b1 = uniform_init(rng, s.hidden, 1, s.input_dim);
  params.unary.W2 = uniform_init(rng, s.num_labels, s.hidden, s.hidden);
  params.unary.b2 = uniform_init(rng, s.num_labels, 1, s.hidden);
  if (s.architecture == Architecture::Pairwise) {
    params.WA = uniform_init(rng, s.num_labels, s.input_dim, s.input_dim);
    params.bA = uniform_init(rng, s.num_labels, 1, s.input_dim);
  } else if (s.architecture == Architecture::Spen) {
    params.prior.W1 = uniform_init(rng, s.prior_hidden, s.num_labels, s.num_labels);
    params.prior.b1 = uniform_init(rng, s.prior_hidden, 1, s.num_labels);
    params.prior.w2 = uniform_init(rng, s.prior_hidden, 1, s.prior_hidden);
    params.prior.b2 = 0.0;
  }
  return params;
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams out = params;
  assign_params(out, Vec::Zero(flatten_params(params).size()));
  return out;
}

Energy model_energy(const ModelSpec& raw_spec) {
  const ModelSpec spec = resolve_spec(raw_spec);
  switch (spec.architecture) {
    case Architecture::Unary:
      return Energy::bilinear(Mat::Identity(spec.num_labels, spec.num_labels));
    case Architecture::Pairwise:
      return Energy::pairwise_multilabel(spec.num_labels);
    case Architecture::Spen:
      return Energy::spen(spec.num_labels, spec.prior_hidden, spec.input_concave, spec.prior_activation);
  }
  throw ContractViolation("model_energy: unknown architecture");
}

EnergyInput forward(const ModelParams& params, const Vec& x) {
  if (x.size() != params.spec.input_dim) {
    throw ContractViolation("forward: expected input of size " + std::to_string(params.spec.input_dim) + ", got " +
                            std::to_string(x.size()));
  }
  const Mlp& m = params.unary;
  Vec u = m.W2 * relu(m.W1 * x + m.b1) + m.b2;
  switch (params.spec.architecture) {
    case Architecture::Unary:
      return u;
    case Architecture::Pairwise: {
      const Vec a = params.WA * x + params.bA;
      return QuadraticInput{-a * a.transpose(), std::move(u)};
    }
    case Architecture::Spen:
      return SpenInput{std::move(u), params.prior};
  }
  return u;
}

ModelParams vjp(const ModelParams& params, const Vec& x, const EnergyInput& grad_v) {
  if (x.size() != params.spec.input_dim) throw ContractViolation("vjp: input has the wrong size");
  ModelParams grad = zeros_like(params);
  const Mlp& m = params.unary;

  const Vec* grad_u = nullptr;
  switch (params.spec.architecture) {
    case Architecture::Unary:
      grad_u = std::get_if<Vec>(&grad_v);
      break;
    case Architecture::Pairwise: {
      const auto* g = std::get_if<QuadraticInput>(&grad_v);
      if (g == nullptr) break;
      grad_u = &g->b;
      const Vec a = params.WA * x + params.bA;
      const Vec grad_a = -(g->A + g->A.transpose()) * a;
      grad.WA = grad_a * x.transpose();
      grad.bA = grad_a;
      break;
    }
    case Architecture::Spen: {
      const auto* g = std::get_if<SpenInput>(&grad_v);
      if (g == nullptr) break;
      grad_u = &g->u;
      grad.prior = g->prior;
      break;
    }
  }
  if (grad_u == nullptr || grad_u->size() != params.spec.num_labels) {
    throw ContractViolation("vjp: gradient does not match the " + architecture_name(params.spec.architecture) +
                            " output");
  }
  const Vec z1 = m.W1 * x + m.b1;
  const Vec h = relu(z1);
  grad.unary.W2 = *grad_u * h.transpose();
  grad.unary.b2 = *grad_u;
  const Vec grad_z1 = ((m.W2.transpose() * *grad_u).array() * (z1.array() > 0.0).cast<double>()).matrix();
  grad.unary.W1 = grad_z1 * x.transpose();
  grad.unary.b1 = grad_z1;
  return grad;
}

std::vector<TensorShape> param_shapes(const ModelParams& params) {
  std::vector<TensorShape> shapes = {
      {"unary.W1", params.unary.W1.rows(), params.unary.W1.cols()},
      {"unary.b1", params.unary.b1.size(), 1},
      {"unary.W2", params.unary.W2.rows(), params.unary.W2.cols()},
      {"unary.b2", params.unary.b2.size(), 1},
  };
  if (params.spec.architecture == Architecture::Pairwise) {
    shapes.push_back({"pairwise.WA", params.WA.rows(), params.WA.cols()});
    shapes.push_back({"pairwise.bA", params.bA.size(), 1});
  } else if (params.spec.architecture == Architecture::Spen) {
    shapes.push_back({"prior.W1", params.prior.W1.rows(), params.prior.W1.cols()});
    shapes.push_back({"prior.b1", params.prior.b1.size(), 1});
    shapes.push_back({"prior.w2", params.prior.w2.size(), 1});
    shapes.push_back({"prior.b2", 1, 1});
  }
  return shapes;
}

Vec flatten_params(const ModelParams& params) {
  std::vector<double> out;
  auto push = [&](const auto& t) { out.insert(out.end(), t.data(), t.data() + t.size()); };
  push(params.unary.W1);
  push(params.unary.b1);
  push(params.unary.W2);
  push(params.unary.b2);
  if (params.spec.architecture == Architecture::Pairwise) {
    push(params.WA);
    push(params.bA);
  } else if (params.spec.architecture == Architecture::Spen) {
    push(params.prior.W1);
    push(params.prior.b1);
    push(params.prior.w2);
    out.push_back(params.prior.b2);
  }
  return Eigen::Map<const Vec>(out.data(), static_cast<Eigen::Index>(out.size()));
}

void assign_params(ModelParams& params, const Vec& flat) {
  Eigen::Index at = 0;
  auto take = [&](auto& t) {
    if (at + t.size() > flat.size()) throw ContractViolation("assign_params: flat vector too short");
    t = flat.segment(at, t.size()).reshaped(t.rows(), t.cols());
    at += t.size();
  };
  take(params.unary.W1);
  take(params.unary.b1);
  take(params.unary.W2);
  take(params.unary.b2);
  if (params.spec.architecture == Architecture::Pairwise) {
    take(params.WA);
    take(params.bA);
  } else if (params.spec.architecture == Architecture::Spen) {
    take(params.prior.W1);
    take(params.prior.b1);
    take(params.prior.w2);
    if (at >= flat.size()) throw ContractViolation("assign_params: flat vector too short");
    params.prior.b2 = flat[at++];
  }
  if (at != flat.size()) throw ContractViolation("assign_params: flat vector too long");
}

}  // namespace efy
