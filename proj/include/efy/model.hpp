#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "efy/energy.hpp"
#include "efy/numerics.hpp"

namespace efy {

enum class Architecture { Unary, Pairwise, Spen };

std::optional<Architecture> architecture_from_name(const std::string& name);
std::string architecture_name(Architecture arch);

/// One-hidden-layer relu network W2 relu(W1 x + b1) + b2.
struct Mlp {
  Mat W1;
  Vec b1;
  Mat W2;
  Vec b2;
};

struct ModelSpec {
  Architecture architecture = Architecture::Unary;
  Eigen::Index input_dim = 0;
  Eigen::Index num_labels = 0;
  /// 0 selects min(100, floor(d/3)), at least 1.
  Eigen::Index hidden = 0;
  /// SPEN prior-network width; 0 selects the unary hidden width.
  Eigen::Index prior_hidden = 0;
  bool input_concave = true;
  PriorActivation prior_activation = PriorActivation::Softplus;
};

Eigen::Index default_hidden_width(Eigen::Index input_dim);

/// Parameters theta of x -> v. Gradients with respect to theta use the same type.
///   unary:    u = mlp(x)                         -> v = u
///   pairwise: u = mlp(x), a = WA x + bA, U = -a a^T -> v = (U, u)
///   spen:     u = mlp(x), prior weights w         -> v = (u, w)
struct ModelParams {
  ModelSpec spec;
  std::uint64_t seed = 0;
  Mlp unary;
  Mat WA;
  Vec bA;
  PriorWeights prior;
};

/// Resolves the default widths and validates dimensions.
ModelSpec resolve_spec(ModelSpec spec);

/// Uniform(-s, s) initialization with s = 1 / sqrt(fan_in).
ModelParams init_params(const ModelSpec& spec, std::uint64_t seed);
ModelParams zeros_like(const ModelParams& params);

/// Energy paired with the architecture's output.
Energy model_energy(const ModelSpec& spec);

EnergyInput forward(const ModelParams& params, const Vec& x);

/// Gradient of <grad_v, forward(params, x)> with respect to the parameters.
ModelParams vjp(const ModelParams& params, const Vec& x, const EnergyInput& grad_v);

/// Fixed-order flat view: unary W1, b1, W2, b2; then WA, bA (pairwise) or
/// prior W1, b1, w2, b2 (spen). Matrices are column-major.
Vec flatten_params(const ModelParams& params);
void assign_params(ModelParams& params, const Vec& flat);

struct TensorShape {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};
std::vector<TensorShape> param_shapes(const ModelParams& params);

/// Binary parameter file: one line of JSON header, then little-endian IEEE-754
/// doubles in flatten_params order.
void save_params(const std::string& path, const ModelParams& params);
ModelParams load_params(const std::string& path);

}  // namespace efy
