#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <ostream>
#include <string>
#include <vector>

#include "efy/conjugate.hpp"
#include "efy/dataset.hpp"
#include "efy/losses.hpp"
#include "efy/model.hpp"
#include "efy/regularizer.hpp"

namespace efy {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  /// L2 weight in (lambda / 2) ||theta||^2.
  double lambda = 1e-4;
  double learning_rate = 1e-3;
  Eigen::Index batch_size = 32;
  int epochs = 200;
  AdamConfig adam = {};
  std::uint64_t seed = 0;
  /// Regularizer strength gamma of the energy network's Omega.
  double gamma = 1.0;
  SolverConfig solver = SolverConfig::training();
  GradientPath gradient_path = GradientPath::Envelope;
  /// Record the flat parameter vector after every update (for trajectory comparisons).
  bool record_trajectory = false;

  void validate() const;
};

/// What is trained: architecture, output regularizer and loss.
struct Problem {
  ModelSpec model;
  Regularizer::Kind regularizer = Regularizer::Kind::GiniBinary;
  LossKind loss = LossKind::Gfy;
};

/// Omega used by the loss (indicator for the perceptron loss) and for prediction.
Regularizer problem_regularizer(const Problem& problem, double gamma);

struct TrainReport {
  std::vector<double> epoch_loss;
  /// Empty when no dev split was given.
  std::vector<double> dev_accuracy;
  ModelParams params;
  double wall_seconds = 0.0;
  std::vector<Vec> trajectory;
};

/// Mean loss and gradient over `rows` plus (lambda / 2) ||theta||^2, as a
/// function of the flat parameter vector.
struct ObjectiveEval {
  double value = 0.0;
  double data_loss = 0.0;
  Vec grad;
};
ObjectiveEval batch_objective(const ModelParams& params, const Problem& problem, const MultilabelDataset& data,
                              std::span<const Eigen::Index> rows, const TrainConfig& cfg);

/// ADAM on minibatches; deterministic given cfg.seed.
TrainReport train(const MultilabelDataset& train_set, const MultilabelDataset* dev_set, const Problem& problem,
                  const TrainConfig& cfg);

/// Soft prediction p*(forward(theta, x)) for every row.
Mat predict_soft(const ModelParams& params, const Problem& problem, const MultilabelDataset& data, double gamma,
                 const SolverConfig& cfg = {});
/// Hamming-decoded predictions.
Mat predict(const ModelParams& params, const Problem& problem, const MultilabelDataset& data, double gamma,
            const SolverConfig& cfg = {});
double evaluate_accuracy(const ModelParams& params, const Problem& problem, const MultilabelDataset& data,
                         double gamma, const SolverConfig& cfg = {});

std::vector<double> log_space(double lo, double hi, int count);

struct GridSpec {
  std::vector<double> lambdas = log_space(1e-4, 1e1, 5);
  std::vector<double> learning_rates = log_space(1e-5, 1e-1, 10);
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  double dev_fraction = 0.25;
};

struct GridCell {
  double lambda = 0.0;
  double learning_rate = 0.0;
  /// Mean over seeds; NaN when every seed diverged.
  double dev_accuracy = 0.0;
  int diverged = 0;
};

struct SearchResult {
  std::vector<GridCell> table;
  std::size_t best = 0;
  TrainConfig best_config;
  /// One refit per seed on the whole training split.
  std::vector<TrainReport> refits;
  std::vector<double> test_accuracy;
  double mean_test_accuracy = 0.0;
};

/// For every cell and seed: train on (1 - dev_fraction) of `train_raw`, score on
/// the rest. Pick the best mean dev accuracy (ties: smaller lambda, then smaller
/// learning rate), refit on all of `train_raw` per seed and score on `test_raw`.
/// Inputs are unstandardized; each fit standardizes with its own training rows.
SearchResult hyperparam_search(const MultilabelDataset& train_raw, const MultilabelDataset& test_raw,
                               const Problem& problem, const TrainConfig& base, const GridSpec& grid);

/// "epoch,loss,dev_acc" rows.
void write_metrics_csv(std::ostream& out, const TrainReport& report);
std::string report_summary_json(const TrainReport& report, const Problem& problem, const TrainConfig& cfg);

}  // namespace efy
