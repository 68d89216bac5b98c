#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "efy/conjugate.hpp"
#include "efy/energy.hpp"
#include "efy/numerics.hpp"
#include "efy/regularizer.hpp"

namespace efy {

/// L(yhat, y) = <yhat, V y + b> + c(y) with the identity label embedding.
struct AffineLossDecomposition {
  std::string name;
  Mat V;
  Vec b;
  std::function<double(const Vec&)> c;

  Eigen::Index dim() const { return b.size(); }
  double loss(const Vec& yhat, const Vec& y) const;
};

/// Normalized Hamming distance: V = -(2/k) I, b = (1/k) 1, c(y) = (1/k) sum y.
AffineLossDecomposition hamming_decomposition(Eigen::Index k);
double hamming_loss(const Vec& yhat, const Vec& y);

/// All 2^k binary vectors, index bits little-endian.
std::vector<Vec> enumerate_labels(Eigen::Index k);

/// argmin_{yhat in {0,1}^k} <yhat, V p + b>; coordinatewise since the embedding
/// is the identity. Ties (zero score) decode to 0.
Vec decode(const Vec& p, const AffineLossDecomposition& decomp);
/// Hamming decoding: yhat_j = 1 iff p_j > 0.5.
Vec decode_threshold(const Vec& p);

/// sigma = max_y ||V^T y||_* over enumerated labels. Dual of L2 is L2, of L1 is Linf.
double decomposition_sigma(const AffineLossDecomposition& decomp, Norm primal = Norm::L2);

/// Mean per-label agreement.
double accuracy(const Mat& predictions, const Mat& labels);

/// Distribution q over {0,1}^k, stored densely over enumerate_labels(k).
struct LabelDistribution {
  std::vector<Vec> support;
  std::vector<double> prob;

  Eigen::Index dim() const { return support.empty() ? 0 : support.front().size(); }
  Vec mean() const;
  Mat second_moment() const;
};

LabelDistribution point_mass(const Vec& y);
LabelDistribution product_bernoulli(const Vec& rates);
/// Dirichlet(1, ..., 1) weights over all 2^k labels.
LabelDistribution random_label_distribution(Eigen::Index k, Rng& rng);

/// E_q L(yhat, Y) and its excess over the best yhat.
double pointwise_target_risk(const Vec& yhat, const LabelDistribution& q, const AffineLossDecomposition& decomp);
double target_excess(const Vec& yhat, const LabelDistribution& q, const AffineLossDecomposition& decomp);

/// xi(eps) = eps^2 / (8 sigma^2 M).
double calibration_xi(double eps, double sigma, double M);

struct CalibrationPoint {
  EnergyInput v;
  Vec argmax;
  Vec decoded;
  double target_excess = 0.0;
  double surrogate_excess = 0.0;
  double xi = 0.0;
  bool ok = true;
};

struct CalibrationReport {
  std::vector<CalibrationPoint> points;
  double sigma = 0.0;
  double M = 0.0;
  bool M_estimated = false;
  /// Analytic smoothness of the surrogate in the unary block, 1 / strong_convexity.
  double M_unary = 0.0;
  double bayes_surrogate_risk = 0.0;
  double slack = 1e-6;
  std::size_t violations = 0;
  /// max over points of xi - surrogate_excess
  double worst_margin = -kInf;
};

struct CalibrationOptions {
  /// 0 selects the analytic value (bilinear) or a sampled estimate inflated 2x (pairwise).
  double M = 0.0;
  double slack = 1e-6;
  std::uint64_t seed = 0;
  int bayes_restarts = 8;
  int bayes_iters = 400;
  SolverConfig solver = {};
};

/// E_q L^Phi_Omega(v, Y).
double pointwise_surrogate_risk(const Energy& energy, const Regularizer& reg, const EnergyInput& v,
                                const LabelDistribution& q, const SolverConfig& cfg = {});

/// Checks xi(target excess) <= surrogate excess + slack at every v.
/// Supported: bilinear with identity U (excess in Fenchel-Young form) and the
/// pairwise multilabel energy with NSD U (Bayes risk by multi-start descent over
/// (u, L) with U = -L L^T, refined per sample in u).
CalibrationReport calibration_check(const Energy& energy, const Regularizer& reg,
                                    const AffineLossDecomposition& decomp, const LabelDistribution& q,
                                    std::span<const EnergyInput> v_samples, const CalibrationOptions& opts = {});

/// max ||grad f(v) - grad f(v')|| / ||v - v'|| over random nearby pairs, for the
/// pairwise surrogate (gradient phi(p*(v)) - E phi(Y)).
double estimate_pairwise_smoothness(const Regularizer& reg, std::span<const EnergyInput> around, int pairs,
                                    std::uint64_t seed, const SolverConfig& cfg = {});

}  // namespace efy
