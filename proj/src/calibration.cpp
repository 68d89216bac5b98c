#include "efy/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "efy/losses.hpp"

namespace efy {

double AffineLossDecomposition::loss(const Vec& yhat, const Vec& y) const {
  return yhat.dot(V * y + b) + c(y);
}

AffineLossDecomposition hamming_decomposition(Eigen::Index k) {
  if (k < 1) throw ContractViolation("hamming_decomposition: k must be >= 1");
  const double inv = 1.0 / static_cast<double>(k);
  AffineLossDecomposition d;
  d.name = "hamming";
  d.V = -2.0 * inv * Mat::Identity(k, k);
  d.b = Vec::Constant(k, inv);
  d.c = [inv](const Vec& y) { return inv * y.sum(); };
  return d;
}

double hamming_loss(const Vec& yhat, const Vec& y) {
  if (yhat.size() != y.size() || y.size() == 0) throw ContractViolation("hamming_loss: size mismatch");
  return (yhat - y).cwiseAbs().sum() / static_cast<double>(y.size());
}

std::vector<Vec> enumerate_labels(Eigen::Index k) {
  if (k < 0 || k > 20) throw ContractViolation("enumerate_labels: k must be in [0, 20]");
  const std::size_t count = std::size_t{1} << k;
  std::vector<Vec> out(count, Vec(k));
  for (std::size_t s = 0; s < count; ++s) {
    for (Eigen::Index j = 0; j < k; ++j) out[s][j] = static_cast<double>((s >> j) & 1u);
  }
  return out;
}

Vec decode(const Vec& p, const AffineLossDecomposition& decomp) {
  if (p.size() != decomp.dim()) throw ContractViolation("decode: dimension mismatch");
  const Vec score = decomp.V * p + decomp.b;
  return (score.array() < 0.0).cast<double>().matrix();
}

Vec decode_threshold(const Vec& p) { return (p.array() > 0.5).cast<double>().matrix(); }

double decomposition_sigma(const AffineLossDecomposition& decomp, Norm primal) {
  double sigma = 0.0;
  for (const Vec& y : enumerate_labels(decomp.dim())) {
    const Vec w = decomp.V.transpose() * y;
    sigma = std::max(sigma, primal == Norm::L2 ? w.norm() : w.lpNorm<Eigen::Infinity>());
  }
  return sigma;
}

double accuracy(const Mat& predictions, const Mat& labels) {
  if (predictions.rows() != labels.rows() || predictions.cols() != labels.cols() || labels.size() == 0) {
    throw ContractViolation("accuracy: prediction and label shapes differ");
  }
  return (predictions.array() == labels.array()).cast<double>().mean();
}

Vec LabelDistribution::mean() const {
  Vec m = Vec::Zero(dim());
  for (std::size_t i = 0; i < support.size(); ++i) m += prob[i] * support[i];
  return m;
}

Mat LabelDistribution::second_moment() const {
  Mat s = Mat::Zero(dim(), dim());
  for (std::size_t i = 0; i < support.size(); ++i) s += prob[i] * support[i] * support[i].transpose();
  return s;
}

LabelDistribution point_mass(const Vec& y) {
  LabelDistribution q;
  q.support = enumerate_labels(y.size());
  for (const Vec& s : q.support) q.prob.push_back(s == y ? 1.0 : 0.0);
  return q;
}

LabelDistribution product_bernoulli(const Vec& rates) {
  LabelDistribution q;
  q.support = enumerate_labels(rates.size());
  for (const Vec& s : q.support) {
    double p = 1.0;
    for (Eigen::Index j = 0; j < s.size(); ++j) p *= s[j] == 1.0 ? rates[j] : 1.0 - rates[j];
    q.prob.push_back(p);
  }
  return q;
}

LabelDistribution random_label_distribution(Eigen::Index k, Rng& rng) {
  LabelDistribution q;
  q.support = enumerate_labels(k);
  double total = 0.0;
  for (std::size_t i = 0; i < q.support.size(); ++i) {
    q.prob.push_back(-std::log(1.0 - rng.uniform()));
    total += q.prob.back();
  }
  for (double& p : q.prob) p /= total;
  return q;
}

double pointwise_target_risk(const Vec& yhat, const LabelDistribution& q, const AffineLossDecomposition& decomp) {
  double risk = 0.0;
  for (std::size_t i = 0; i < q.support.size(); ++i) {
    if (q.prob[i] != 0.0) risk += q.prob[i] * decomp.loss(yhat, q.support[i]);
  }
  return risk;
}

double target_excess(const Vec& yhat, const LabelDistribution& q, const AffineLossDecomposition& decomp) {
  double best = kInf;
  for (const Vec& y : enumerate_labels(decomp.dim())) best = std::min(best, pointwise_target_risk(y, q, decomp));
  return pointwise_target_risk(yhat, q, decomp) - best;
}

double calibration_xi(double eps, double sigma, double M) {
  if (sigma <= 0 || M <= 0) throw ContractViolation("calibration_xi: sigma and M must be positive");
  return eps * eps / (8.0 * sigma * sigma * M);
}

double pointwise_surrogate_risk(const Energy& energy, const Regularizer& reg, const EnergyInput& v,
                                const LabelDistribution& q, const SolverConfig& cfg) {
  const double conj = conjugate(energy, reg, v, cfg).value;
  double risk = 0.0;
  for (std::size_t i = 0; i < q.support.size(); ++i) {
    if (q.prob[i] == 0.0) continue;
    risk += q.prob[i] * (conj + reg.value(q.support[i]) - energy.value(v, q.support[i]));
  }
  return risk;
}

namespace {

// Pairwise surrogate in terms of theta = (u, vec L), U = -L L^T.
struct PairwiseObjective {
  const Energy& energy;
  const Regularizer& reg;
  const LabelDistribution& q;
  const SolverConfig& cfg;
  Vec mu;
  Mat second;
  Eigen::Index k;

  QuadraticInput unpack(const Vec& theta) const {
    const Mat L = theta.tail(k * k).reshaped(k, k);
    return QuadraticInput{-L * L.transpose(), theta.head(k)};
  }

  double value(const Vec& theta, Vec* grad) const {
    const QuadraticInput v = unpack(theta);
    const ConjugateResult conj = conjugate(energy, reg, v, cfg);
    const double f = pointwise_surrogate_risk(energy, reg, v, q, cfg);
    if (grad != nullptr) {
      const Vec& p = conj.argmax;
      const Mat G = 0.5 * (p * p.transpose() - second);
      const Mat L = theta.tail(k * k).reshaped(k, k);
      grad->resize(theta.size());
      grad->head(k) = p - mu;
      grad->tail(k * k) = (-(G + G.transpose()) * L).reshaped();
    }
    return f;
  }
};

double descend(const PairwiseObjective& obj, Vec theta, int iters) {
  Vec grad;
  double f = obj.value(theta, &grad);
  double step = 1.0;
  for (int it = 0; it < iters; ++it) {
    const double g2 = grad.squaredNorm();
    if (g2 < 1e-24) break;
    bool accepted = false;
    for (int s = 0; s < 60; ++s) {
      const Vec next = theta - step * grad;
      const double fn = obj.value(next, nullptr);
      if (fn <= f - 1e-4 * step * g2) {
        theta = next;
        f = obj.value(theta, &grad);
        accepted = true;
        step *= 2.0;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return f;
}

Vec gradient_or_zero(const Regularizer& reg, const Vec& p) {
  try {
    return reg.gradient(p);
  } catch (const DomainBoundaryError&) {
    return Vec::Zero(p.size());
  }
}

void finalize(CalibrationReport& report) {
  for (auto& pt : report.points) {
    pt.xi = calibration_xi(pt.target_excess, report.sigma, report.M);
    pt.ok = pt.xi <= pt.surrogate_excess + report.slack;
    if (!pt.ok) ++report.violations;
    report.worst_margin = std::max(report.worst_margin, pt.xi - pt.surrogate_excess);
  }
}

}  // namespace

double estimate_pairwise_smoothness(const Regularizer& reg, std::span<const EnergyInput> around, int pairs,
                                    std::uint64_t seed, const SolverConfig& cfg) {
  if (around.empty() || pairs < 1) throw ContractViolation("estimate_pairwise_smoothness: need samples and pairs");
  const Eigen::Index k = reg.dim();
  const Energy energy = Energy::pairwise_multilabel(k);
  auto grad = [&](const QuadraticInput& v) {
    const Vec p = conjugate(energy, reg, v, cfg).argmax;
    Vec g(k + k * k);
    g.head(k) = p;
    g.tail(k * k) = (0.5 * p * p.transpose()).reshaped();
    return g;
  };
  Rng rng(seed);
  double best = 0.0;
  const double scales[] = {1e-3, 1e-2, 1e-1};
  for (int i = 0; i < pairs; ++i) {
    const auto& v = std::get<QuadraticInput>(around[rng.index(around.size())]);
    const double s = scales[rng.index(3)];
    QuadraticInput w = v;
    w.b += rng.normal_vec(k, s);
    if (rng.bernoulli(0.5)) {
      const Vec c = rng.normal_vec(k, std::sqrt(s));
      Mat dA = -c * c.transpose();
      if (rng.bernoulli(0.5) && is_negative_semidefinite(Mat(w.A - dA), kNsdTol)) dA = -dA;
      w.A += dA;
    }
    const double dv = std::sqrt((w.b - v.b).squaredNorm() + (w.A - v.A).squaredNorm());
    if (dv == 0.0) continue;
    best = std::max(best, (grad(w) - grad(v)).norm() / dv);
  }
  return best;
}

CalibrationReport calibration_check(const Energy& energy, const Regularizer& reg,
                                    const AffineLossDecomposition& decomp, const LabelDistribution& q,
                                    std::span<const EnergyInput> v_samples, const CalibrationOptions& opts) {
  const Eigen::Index k = energy.output_dim();
  if (decomp.dim() != k || q.dim() != k || reg.dim() != k) {
    throw ContractViolation("calibration_check: dimensions of energy, loss, distribution and regularizer differ");
  }
  if (reg.domain().kind() != OutputSet::Kind::Box || !reg.domain().contains(Vec::Zero(k)) ||
      !reg.domain().contains(Vec::Ones(k))) {
    throw ContractViolation("calibration_check: output set must be a box containing {0,1}^k");
  }
  if (reg.strong_convexity() <= 0) throw ContractViolation("calibration_check: regularizer must be strongly convex");

  CalibrationReport report;
  report.slack = opts.slack;
  report.sigma = decomposition_sigma(decomp, reg.strong_convexity_norm());
  report.M_unary = 1.0 / reg.strong_convexity();
  const Vec mu = q.mean();
  double jensen_gap = -reg.value(mu);
  for (std::size_t i = 0; i < q.support.size(); ++i) jensen_gap += q.prob[i] * reg.value(q.support[i]);

  auto target_of = [&](CalibrationPoint& pt, const Vec& p) {
    pt.argmax = p;
    pt.decoded = decode(p, decomp);
    pt.target_excess = target_excess(pt.decoded, q, decomp);
  };

  if (energy.kind() == Energy::Kind::Bilinear) {
    const Mat& U = energy.coupling_matrix();
    if (U.rows() != k || U.cols() != k || U != Mat::Identity(k, k)) {
      throw UnsupportedOperation("calibration_check: bilinear energy must use the identity coupling");
    }
    report.M = opts.M > 0 ? opts.M : report.M_unary;
    report.bayes_surrogate_risk = jensen_gap;
    for (const EnergyInput& v : v_samples) {
      CalibrationPoint pt;
      pt.v = v;
      const Vec& u = std::get<Vec>(v);
      target_of(pt, reg.closed_form_map(u));
      // excess of pointwise surrogate risk in Fenchel-Young form
      pt.surrogate_excess = fy_loss(reg, u, mu);
      report.points.push_back(std::move(pt));
    }
    finalize(report);
    return report;
  }

  if (energy.kind() != Energy::Kind::PairwiseMultilabel) {
    throw UnsupportedOperation("calibration_check: energy '" + energy.name() + "' is not linear-concave");
  }
  for (const EnergyInput& v : v_samples) energy.check_input(v);

  PairwiseObjective obj{energy, reg, q, opts.solver, mu, q.second_moment(), k};
  Rng rng(opts.seed);
  double bayes = kInf;
  for (int r = 0; r < std::max(1, opts.bayes_restarts); ++r) {
    Vec theta(k + k * k);
    if (r == 0) {
      theta.head(k) = gradient_or_zero(reg, mu);
      theta.tail(k * k).setZero();
    } else {
      theta.head(k) = rng.normal_vec(k, 2.0);
      theta.tail(k * k) = rng.normal_vec(k * k, 0.5);
    }
    bayes = std::min(bayes, descend(obj, theta, opts.bayes_iters));
  }
  std::vector<double> values;
  values.reserve(v_samples.size());
  for (const EnergyInput& v : v_samples) {
    values.push_back(pointwise_surrogate_risk(energy, reg, v, q, opts.solver));
    bayes = std::min(bayes, values.back());
  }
  report.bayes_surrogate_risk = bayes;
  if (opts.M > 0) {
    report.M = opts.M;
  } else {
    report.M = 2.0 * estimate_pairwise_smoothness(reg, v_samples, 4 * static_cast<int>(v_samples.size()) + 100,
                                                  opts.seed + 1, opts.solver);
    report.M_estimated = true;
    if (report.M <= 0) report.M = report.M_unary;
  }
  for (std::size_t i = 0; i < v_samples.size(); ++i) {
    CalibrationPoint pt;
    pt.v = v_samples[i];
    target_of(pt, conjugate(energy, reg, v_samples[i], opts.solver).argmax);
    pt.surrogate_excess = values[i] - bayes;
    report.points.push_back(std::move(pt));
  }
  finalize(report);
  return report;
}

}  // namespace efy
