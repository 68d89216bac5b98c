#include "efy/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

#include "efy/calibration.hpp"

namespace efy {

void TrainConfig::validate() const {
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw ContractViolation("train: lambda must be >= 0");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ContractViolation("train: learning rate must be > 0");
  if (batch_size < 1) throw ContractViolation("train: batch size must be >= 1");
  if (epochs < 0) throw ContractViolation("train: epochs must be >= 0");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1) || !(adam.eps > 0)) {
    throw ContractViolation("train: ADAM betas must lie in [0, 1) and eps > 0");
  }
  if (!(gamma > 0)) throw ContractViolation("train: gamma must be > 0");
  solver.validate();
}

Regularizer problem_regularizer(const Problem& problem, double gamma) {
  const OutputSet box = OutputSet::box01(problem.model.num_labels);
  if (problem.loss == LossKind::Perceptron) return Regularizer::indicator(box);
  return Regularizer::make(problem.regularizer, gamma, box);
}

namespace {

LossEval item_loss(const Problem& problem, const Energy& energy, const Regularizer& reg, const EnergyInput& v,
                   const Vec& y, const TrainConfig& cfg) {
  if (problem.loss == LossKind::Gfy || problem.loss == LossKind::Perceptron) {
    return gfy_loss(energy, reg, v, y, cfg.solver, cfg.gradient_path);
  }
  return evaluate_loss(problem.loss, energy, reg, v, y, cfg.solver);
}

ObjectiveEval objective(const ModelParams& params, const Vec& theta, const Problem& problem, const Energy& energy,
                        const Regularizer& reg, const MultilabelDataset& data, std::span<const Eigen::Index> rows,
                        const TrainConfig& cfg) {
  if (rows.empty()) throw ContractViolation("batch_objective: empty batch");
  ObjectiveEval out;
  out.grad = Vec::Zero(theta.size());
  for (Eigen::Index i : rows) {
    const Vec x = data.x(i);
    const Vec y = data.y(i);
    const EnergyInput v = forward(params, x);
    const LossEval loss = item_loss(problem, energy, reg, v, y, cfg);
    if (!std::isfinite(loss.value)) {
      throw DivergenceError("non-finite loss " + std::to_string(loss.value) + " at sample " + std::to_string(i));
    }
    out.data_loss += loss.value;
    out.grad += flatten_params(vjp(params, x, loss.grad_v));
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  out.data_loss *= inv;
  out.grad = inv * out.grad + cfg.lambda * theta;
  out.value = out.data_loss + 0.5 * cfg.lambda * theta.squaredNorm();
  if (!out.grad.allFinite()) throw DivergenceError("non-finite gradient in batch starting at sample " +
                                                   std::to_string(rows.front()));
  return out;
}

void check_labels(const MultilabelDataset& data, const Problem& problem) {
  if (data.size() == 0) throw ContractViolation("train: dataset is empty");
  if (data.num_features() != problem.model.input_dim || data.num_labels() != problem.model.num_labels) {
    throw ContractViolation("train: dataset shape does not match the model");
  }
  if (!((data.Y.array() == 0.0) || (data.Y.array() == 1.0)).all()) {
    throw ContractViolation("train: labels must be in {0, 1}");
  }
}

}  // namespace

ObjectiveEval batch_objective(const ModelParams& params, const Problem& problem, const MultilabelDataset& data,
                              std::span<const Eigen::Index> rows, const TrainConfig& cfg) {
  const Energy energy = model_energy(params.spec);
  const Regularizer reg = problem_regularizer(problem, cfg.gamma);
  return objective(params, flatten_params(params), problem, energy, reg, data, rows, cfg);
}

TrainReport train(const MultilabelDataset& train_set, const MultilabelDataset* dev_set, const Problem& problem,
                  const TrainConfig& cfg) {
  cfg.validate();
  check_labels(train_set, problem);
  const auto start = std::chrono::steady_clock::now();

  TrainReport report;
  report.params = init_params(problem.model, cfg.seed);
  const Energy energy = model_energy(report.params.spec);
  const Regularizer reg = problem_regularizer(problem, cfg.gamma);
  Vec theta = flatten_params(report.params);
  Vec m = Vec::Zero(theta.size());
  Vec s = Vec::Zero(theta.size());
  double beta1_t = 1.0;
  double beta2_t = 1.0;
  Rng shuffler(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const auto n = static_cast<std::size_t>(train_set.size());
  std::vector<Eigen::Index> order(n);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto perm = shuffler.permutation(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<Eigen::Index>(perm[i]);
    double total = 0.0;
    for (std::size_t at = 0; at < n; at += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t len = std::min(n - at, static_cast<std::size_t>(cfg.batch_size));
      const std::span<const Eigen::Index> rows(order.data() + at, len);
      const ObjectiveEval eval = objective(report.params, theta, problem, energy, reg, train_set, rows, cfg);
      total += eval.data_loss * static_cast<double>(len);

      beta1_t *= cfg.adam.beta1;
      beta2_t *= cfg.adam.beta2;
      m = cfg.adam.beta1 * m + (1.0 - cfg.adam.beta1) * eval.grad;
      s = cfg.adam.beta2 * s + (1.0 - cfg.adam.beta2) * eval.grad.cwiseProduct(eval.grad);
      const Vec m_hat = m / (1.0 - beta1_t);
      const Vec s_hat = s / (1.0 - beta2_t);
      theta -= cfg.learning_rate * (m_hat.array() / (s_hat.array().sqrt() + cfg.adam.eps)).matrix();
      if (!theta.allFinite()) throw DivergenceError("parameters became non-finite in epoch " + std::to_string(epoch));
      assign_params(report.params, theta);
      if (cfg.record_trajectory) report.trajectory.push_back(theta);
    }
    report.epoch_loss.push_back(total / static_cast<double>(n));
    if (dev_set != nullptr && dev_set->size() > 0) {
      report.dev_accuracy.push_back(evaluate_accuracy(report.params, problem, *dev_set, cfg.gamma, cfg.solver));
    }
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

Mat predict_soft(const ModelParams& params, const Problem& problem, const MultilabelDataset& data, double gamma,
                 const SolverConfig& cfg) {
  const Energy energy = model_energy(params.spec);
  const Regularizer reg = problem_regularizer(problem, gamma);
  Mat P(data.size(), params.spec.num_labels);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    P.row(i) = conjugate(energy, reg, forward(params, data.x(i)), cfg).argmax.transpose();
  }
  return P;
}

Mat predict(const ModelParams& params, const Problem& problem, const MultilabelDataset& data, double gamma,
            const SolverConfig& cfg) {
  const Mat P = predict_soft(params, problem, data, gamma, cfg);
  Mat out(P.rows(), P.cols());
  for (Eigen::Index i = 0; i < P.rows(); ++i) out.row(i) = decode_threshold(P.row(i).transpose()).transpose();
  return out;
}

double evaluate_accuracy(const ModelParams& params, const Problem& problem, const MultilabelDataset& data,
                         double gamma, const SolverConfig& cfg) {
  return accuracy(predict(params, problem, data, gamma, cfg), data.Y);
}

std::vector<double> log_space(double lo, double hi, int count) {
  if (count < 1 || !(lo > 0) || !(hi > 0)) throw ContractViolation("log_space: need count >= 1 and positive ends");
  std::vector<double> out;
  if (count == 1) return {lo};
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < count; ++i) out.push_back(std::pow(10.0, a + (b - a) * i / (count - 1)));
  return out;
}

SearchResult hyperparam_search(const MultilabelDataset& train_raw, const MultilabelDataset& test_raw,
                               const Problem& problem, const TrainConfig& base, const GridSpec& grid) {
  if (grid.lambdas.empty() || grid.learning_rates.empty() || grid.seeds.empty()) {
    throw ContractViolation("hyperparam_search: grid is empty");
  }
  if (!(grid.dev_fraction > 0 && grid.dev_fraction < 1)) {
    throw ContractViolation("hyperparam_search: dev fraction must be in (0, 1)");
  }
  std::vector<double> lambdas = grid.lambdas;
  std::vector<double> rates = grid.learning_rates;
  std::sort(lambdas.begin(), lambdas.end());
  std::sort(rates.begin(), rates.end());

  SearchResult result;
  std::string failures;
  for (double lambda : lambdas) {
    for (double lr : rates) {
      GridCell cell{lambda, lr, 0.0, 0};
      double sum = 0.0;
      for (std::uint64_t seed : grid.seeds) {
        DataSplit s = split(train_raw, {1.0 - grid.dev_fraction, grid.dev_fraction, 0.0}, seed);
        standardize(s);
        TrainConfig cfg = base;
        cfg.lambda = lambda;
        cfg.learning_rate = lr;
        cfg.seed = seed;
        try {
          const TrainReport r = train(s.train, nullptr, problem, cfg);
          sum += evaluate_accuracy(r.params, problem, s.dev, cfg.gamma, cfg.solver);
        } catch (const DivergenceError& e) {
          ++cell.diverged;
          failures += "  lambda=" + std::to_string(lambda) + " lr=" + std::to_string(lr) +
                      " seed=" + std::to_string(seed) + ": " + e.what() + "\n";
        }
      }
      const int ok = static_cast<int>(grid.seeds.size()) - cell.diverged;
      cell.dev_accuracy = ok > 0 ? sum / ok : std::numeric_limits<double>::quiet_NaN();
      result.table.push_back(cell);
    }
  }

  // sorted by (lambda, lr), so strict improvement keeps the smaller values on ties
  bool found = false;
  for (std::size_t i = 0; i < result.table.size(); ++i) {
    const double acc = result.table[i].dev_accuracy;
    if (std::isnan(acc)) continue;
    if (!found || acc > result.table[result.best].dev_accuracy) {
      result.best = i;
      found = true;
    }
  }
  if (!found) throw DivergenceError("hyperparam_search: every grid cell diverged\n" + failures);

  result.best_config = base;
  result.best_config.lambda = result.table[result.best].lambda;
  result.best_config.learning_rate = result.table[result.best].learning_rate;
  double total = 0.0;
  for (std::uint64_t seed : grid.seeds) {
    DataSplit s = split_with_test(train_raw, test_raw, 0.0, seed);
    standardize(s);
    TrainConfig cfg = result.best_config;
    cfg.seed = seed;
    result.refits.push_back(train(s.train, nullptr, problem, cfg));
    result.test_accuracy.push_back(evaluate_accuracy(result.refits.back().params, problem, s.test, cfg.gamma,
                                                     cfg.solver));
    total += result.test_accuracy.back();
  }
  result.mean_test_accuracy = total / static_cast<double>(grid.seeds.size());
  return result;
}

void write_metrics_csv(std::ostream& out, const TrainReport& report) {
  out << "epoch,loss,dev_acc\n";
  char buf[64];
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%.17g", report.epoch_loss[e]);
    out << e + 1 << ',' << buf << ',';
    if (e < report.dev_accuracy.size()) {
      std::snprintf(buf, sizeof buf, "%.17g", report.dev_accuracy[e]);
      out << buf;
    }
    out << '\n';
  }
}

std::string report_summary_json(const TrainReport& report, const Problem& problem, const TrainConfig& cfg) {
  nlohmann::json j;
  j["architecture"] = architecture_name(problem.model.architecture);
  j["loss"] = loss_kind_name(problem.loss);
  j["regularizer"] = problem.loss == LossKind::Perceptron ? "indicator" : regularizer_kind_name(problem.regularizer);
  j["gamma"] = cfg.gamma;
  j["lambda"] = cfg.lambda;
  j["learning_rate"] = cfg.learning_rate;
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = cfg.epochs;
  j["seed"] = cfg.seed;
  j["num_parameters"] = flatten_params(report.params).size();
  j["final_loss"] = report.epoch_loss.empty() ? nlohmann::json(nullptr) : nlohmann::json(report.epoch_loss.back());
  j["final_dev_accuracy"] =
      report.dev_accuracy.empty() ? nlohmann::json(nullptr) : nlohmann::json(report.dev_accuracy.back());
  j["wall_seconds"] = report.wall_seconds;
  return j.dump(2);
}

}  // namespace efy
