#pragma once

#include <optional>
#include <string>
#include <variant>

#include "efy/numerics.hpp"

namespace efy {

/// Quadratic energy input v = (A, b): Phi = 1/2 <p, A p> + <p, b>.
/// The pairwise multilabel energy stores (U, u) in the same slots.
struct QuadraticInput {
  Mat A;
  Vec b;
};

/// Weights of the SPEN prior network Psi(w, p) = w2' act(W1 p + b1) + b2.
/// In the input-concave variant the stored w2 is the pre-softplus parameter.
struct PriorWeights {
  Mat W1;
  Vec b1;
  Vec w2;
  double b2 = 0.0;
};

struct SpenInput {
  Vec u;
  PriorWeights prior;
};

/// Tagged energy input. Also used for gradients with respect to the input.
using EnergyInput = std::variant<Vec, QuadraticInput, SpenInput>;

/// Flat view of an EnergyInput (fixed order: vector; A col-major then b;
/// u, W1 col-major, b1, w2, b2).
Vec flatten(const EnergyInput& v);
/// Inverse of flatten using `like` for shapes.
EnergyInput unflatten_like(const EnergyInput& like, const Vec& flat);
EnergyInput zeros_like(const EnergyInput& like);
/// a + scale * b, same alternative required.
EnergyInput add_scaled(const EnergyInput& a, const EnergyInput& b, double scale);

enum class PriorActivation { Softplus, Relu };

/// Energy / coupling Phi(v, p). Higher means more compatible.
class Energy {
 public:
  enum class Kind { Bilinear, LinearQuadratic, PairwiseMultilabel, Rectifier, Maxout, LseNet, Spen };
  enum class PStructure { Linear, QuadraticConcave, Concave, Nonconcave };
  enum class VStructure { Linear, Convex, Nonconvex };

  /// <v, U p> with U of shape d x k.
  static Energy bilinear(Mat U);
  static Energy linear_quadratic(Eigen::Index k);
  static Energy pairwise_multilabel(Eigen::Index k);
  /// <relu(v), U p>; U must be elementwise nonnegative.
  static Energy rectifier(Mat U);
  /// p * max(v) with scalar p.
  static Energy maxout(Eigen::Index d);
  /// p * LSE^gamma(v) with scalar p.
  static Energy lse_net(Eigen::Index d, double gamma);
  /// <u, p> - Psi(w, p); the prior network has `prior_hidden` units.
  static Energy spen(Eigen::Index k, Eigen::Index prior_hidden, bool input_concave,
                     PriorActivation activation = PriorActivation::Softplus);

  Kind kind() const { return kind_; }
  std::string name() const;
  /// Dimension k of p.
  Eigen::Index output_dim() const { return k_; }
  PStructure p_structure() const;
  VStructure v_structure() const;
  bool concave_in_p() const { return p_structure() != PStructure::Nonconcave; }
  bool linear_in_p() const { return p_structure() == PStructure::Linear; }
  bool input_concave() const { return input_concave_; }
  Eigen::Index prior_hidden() const { return prior_hidden_; }
  PriorActivation prior_activation() const { return activation_; }
  const Mat& coupling_matrix() const { return U_; }
  double lse_gamma() const { return lse_gamma_; }

  /// Throws ContractViolation if v does not have the shape this energy expects.
  void check_input(const EnergyInput& v) const;

  double value(const EnergyInput& v, const Vec& p) const;
  /// Gradient in p. Maxout ties pick the lowest index.
  Vec grad_p(const EnergyInput& v, const Vec& p) const;
  /// Gradient in v, shaped like v.
  EnergyInput grad_v(const EnergyInput& v, const Vec& p) const;
  /// For linear-in-p energies, c(v) with Phi(v, p) = <c(v), p>.
  Vec linear_coefficient(const EnergyInput& v) const;

  /// Prior network value Psi(w, p).
  double prior_value(const PriorWeights& w, const Vec& p) const;

 private:
  Energy(Kind kind, Eigen::Index k) : kind_(kind), k_(k) {}

  Kind kind_;
  Eigen::Index k_;
  Eigen::Index d_ = 0;
  Mat U_;
  double lse_gamma_ = 1.0;
  Eigen::Index prior_hidden_ = 0;
  bool input_concave_ = false;
  PriorActivation activation_ = PriorActivation::Softplus;
};

std::optional<Energy::Kind> energy_kind_from_name(const std::string& name);
std::string energy_kind_name(Energy::Kind kind);

/// Joint smoothness of (b, p) -> 1/2 <p, A p> + <p, b> for fixed A: the
/// spectral norm of [[0, I], [I, A]].
double quadratic_joint_smoothness(const Mat& A);

}  // namespace efy
