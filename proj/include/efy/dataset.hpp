#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "efy/numerics.hpp"

namespace efy {

/// Dense multilabel data. Y is n x k with entries in {0, 1}.
struct MultilabelDataset {
  Mat X;
  Mat Y;
  /// Standardization statistics (empty until standardized).
  Vec mean;
  Vec stddev;

  Eigen::Index size() const { return X.rows(); }
  Eigen::Index num_features() const { return X.cols(); }
  Eigen::Index num_labels() const { return Y.cols(); }
  Vec x(Eigen::Index i) const { return X.row(i).transpose(); }
  Vec y(Eigen::Index i) const { return Y.row(i).transpose(); }
};

struct LibsvmOptions {
  /// 0 infers from the data.
  Eigen::Index num_features = 0;
  Eigen::Index num_labels = 0;
  bool one_based_labels = true;
};

/// Lines look like "1,3 2:0.5 4:1.0": comma-separated labels (possibly empty,
/// the line then starts with whitespace), then 1-based index:value pairs.
MultilabelDataset parse_libsvm_multilabel(std::istream& in, const LibsvmOptions& opts = {});
MultilabelDataset load_libsvm_multilabel(const std::string& path, const LibsvmOptions& opts = {});
void write_libsvm_multilabel(std::ostream& out, const MultilabelDataset& data, bool one_based_labels = true);

MultilabelDataset subset(const MultilabelDataset& data, const std::vector<Eigen::Index>& rows);

struct SplitFractions {
  double train = 0.8;
  double dev = 0.0;
  double test = 0.2;
};

struct DataSplit {
  MultilabelDataset train;
  MultilabelDataset dev;
  MultilabelDataset test;
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> dev_rows;
  std::vector<Eigen::Index> test_rows;
};

/// Seeded permutation split. Sizes are rounded from the fractions; when they sum
/// to one the test split takes the remainder.
DataSplit split(const MultilabelDataset& data, const SplitFractions& fractions, std::uint64_t seed);

/// Keeps a shipped test set and carves dev out of the training rows.
DataSplit split_with_test(const MultilabelDataset& train, const MultilabelDataset& test, double dev_fraction,
                          std::uint64_t seed);

/// Column means and standard deviations (population), with std floored at 1e-8
/// and constant columns given std 1.
void fit_standardizer(MultilabelDataset& train);
/// Applies stats to X in place and records them on the dataset.
void apply_standardizer(MultilabelDataset& data, const Vec& mean, const Vec& stddev);
/// Fits on split.train and applies the same statistics to dev and test.
void standardize(DataSplit& split);

/// Planted pairwise multilabel data: x ~ N(0, I_d),
///   u(x) = Wu x + cu,  a(x) = Wa x + ca,
///   P(y | x) proportional to exp((<u, y> - (a^T y)^2 / 2) / T)  over y in {0,1}^k
/// (exact enumeration; T = 0 takes the argmax).
struct PlantedPairwiseSpec {
  Eigen::Index n = 2000;
  Eigen::Index d = 20;
  Eigen::Index k = 5;
  double unary_scale = 2.0;
  double unary_bias = 0.5;
  double coupling_scale = 2.0;
  double coupling_bias = 1.0;
  double temperature = 0.25;
  std::uint64_t seed = 0;
};

MultilabelDataset make_planted_pairwise(const PlantedPairwiseSpec& spec);

}  // namespace efy
