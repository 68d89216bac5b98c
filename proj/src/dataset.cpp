#include "efy/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "efy/errors.hpp"

namespace efy {

namespace {

struct SparseRow {
  std::vector<Eigen::Index> labels;
  std::vector<std::pair<Eigen::Index, double>> features;
};

long long parse_int(const std::string& tok, std::size_t line, const char* what) {
  long long value = 0;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ParseError(line, std::string("malformed ") + what + " '" + tok + "'");
  return value;
}

double parse_double(const std::string& tok, std::size_t line) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(tok, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != tok.size() || !std::isfinite(value)) {
    throw ParseError(line, "malformed feature value '" + tok + "'");
  }
  return value;
}

SparseRow parse_line(const std::string& text, std::size_t line, bool one_based_labels) {
  SparseRow row;
  std::istringstream tokens(text);
  std::string tok;
  bool first = true;
  const bool starts_blank = text.empty() || std::isspace(static_cast<unsigned char>(text.front()));
  while (tokens >> tok) {
    const auto colon = tok.find(':');
    if (first && !starts_blank && colon == std::string::npos) {
      std::string label;
      std::istringstream parts(tok);
      while (std::getline(parts, label, ',')) {
        if (label.empty()) throw ParseError(line, "empty label in '" + tok + "'");
        const long long raw = parse_int(label, line, "label");
        const long long j = one_based_labels ? raw - 1 : raw;
        if (j < 0) throw ParseError(line, "label index " + label + " out of range");
        row.labels.push_back(static_cast<Eigen::Index>(j));
      }
    } else {
      if (colon == std::string::npos) throw ParseError(line, "expected index:value, got '" + tok + "'");
      const long long idx = parse_int(tok.substr(0, colon), line, "feature index");
      if (idx < 1) throw ParseError(line, "feature index " + std::to_string(idx) + " must be >= 1");
      row.features.emplace_back(static_cast<Eigen::Index>(idx - 1), parse_double(tok.substr(colon + 1), line));
    }
    first = false;
  }
  return row;
}

}  // namespace

MultilabelDataset parse_libsvm_multilabel(std::istream& in, const LibsvmOptions& opts) {
  std::vector<SparseRow> rows;
  std::vector<std::size_t> line_of;
  std::string text;
  std::size_t line = 0;
  Eigen::Index max_feature = -1;
  Eigen::Index max_label = -1;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    SparseRow row = parse_line(text, line, opts.one_based_labels);
    for (const auto& [j, value] : row.features) {
      if (opts.num_features > 0 && j >= opts.num_features) {
        throw ParseError(line, "feature index " + std::to_string(j + 1) + " exceeds declared dimension " +
                                   std::to_string(opts.num_features));
      }
      max_feature = std::max(max_feature, j);
    }
    for (Eigen::Index j : row.labels) {
      if (opts.num_labels > 0 && j >= opts.num_labels) {
        throw ParseError(line, "label " + std::to_string(opts.one_based_labels ? j + 1 : j) +
                                   " exceeds declared label count " + std::to_string(opts.num_labels));
      }
      max_label = std::max(max_label, j);
    }
    rows.push_back(std::move(row));
    line_of.push_back(line);
  }
  const Eigen::Index d = opts.num_features > 0 ? opts.num_features : max_feature + 1;
  const Eigen::Index k = opts.num_labels > 0 ? opts.num_labels : max_label + 1;
  if (rows.empty()) throw ParseError(line, "no samples");
  if (d < 1 || k < 1) throw ParseError(line, "cannot infer feature or label dimension");

  MultilabelDataset data;
  data.X = Mat::Zero(static_cast<Eigen::Index>(rows.size()), d);
  data.Y = Mat::Zero(static_cast<Eigen::Index>(rows.size()), k);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (const auto& [j, value] : rows[i].features) data.X(r, j) = value;
    for (Eigen::Index j : rows[i].labels) data.Y(r, j) = 1.0;
  }
  return data;
}

MultilabelDataset load_libsvm_multilabel(const std::string& path, const LibsvmOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path);
  return parse_libsvm_multilabel(in, opts);
}

void write_libsvm_multilabel(std::ostream& out, const MultilabelDataset& data, bool one_based_labels) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    bool first = true;
    for (Eigen::Index j = 0; j < data.num_labels(); ++j) {
      if (data.Y(i, j) != 1.0) continue;
      out << (first ? "" : ",") << (one_based_labels ? j + 1 : j);
      first = false;
    }
    for (Eigen::Index j = 0; j < data.num_features(); ++j) {
      if (data.X(i, j) != 0.0) out << ' ' << j + 1 << ':' << data.X(i, j);
    }
    out << '\n';
  }
  out.precision(old_precision);
}

MultilabelDataset subset(const MultilabelDataset& data, const std::vector<Eigen::Index>& rows) {
  MultilabelDataset out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), data.num_features());
  out.Y.resize(static_cast<Eigen::Index>(rows.size()), data.num_labels());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (rows[i] < 0 || rows[i] >= data.size()) throw ContractViolation("subset: row index out of range");
    out.X.row(r) = data.X.row(rows[i]);
    out.Y.row(r) = data.Y.row(rows[i]);
  }
  out.mean = data.mean;
  out.stddev = data.stddev;
  return out;
}

DataSplit split(const MultilabelDataset& data, const SplitFractions& f, std::uint64_t seed) {
  if (f.train < 0 || f.dev < 0 || f.test < 0 || f.train + f.dev + f.test > 1.0 + 1e-12) {
    throw ContractViolation("split: fractions must be nonnegative and sum to at most 1");
  }
  const Eigen::Index n = data.size();
  Eigen::Index n_train = static_cast<Eigen::Index>(std::llround(f.train * static_cast<double>(n)));
  Eigen::Index n_dev = static_cast<Eigen::Index>(std::llround(f.dev * static_cast<double>(n)));
  Eigen::Index n_test = static_cast<Eigen::Index>(std::llround(f.test * static_cast<double>(n)));
  // fractions summing to one: the last nonempty split takes the remainder
  if (std::abs(f.train + f.dev + f.test - 1.0) <= 1e-12) {
    if (f.test > 0) {
      n_test = n - n_train - n_dev;
    } else if (f.dev > 0) {
      n_dev = n - n_train;
    } else {
      n_train = n;
    }
  }
  if (n_train + n_dev + n_test > n || n_test < 0 || n_dev < 0) throw ContractViolation("split: rounded sizes exceed n");
  auto check = [](double frac, Eigen::Index size, const char* name) {
    if (frac > 0 && size == 0) throw ContractViolation(std::string("split: ") + name + " split is empty");
  };
  check(f.train, n_train, "train");
  check(f.dev, n_dev, "dev");
  check(f.test, n_test, "test");

  Rng rng(seed);
  const auto perm = rng.permutation(static_cast<std::size_t>(n));
  DataSplit out;
  for (Eigen::Index i = 0; i < n_train + n_dev + n_test; ++i) {
    const auto row = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]);
    if (i < n_train) {
      out.train_rows.push_back(row);
    } else if (i < n_train + n_dev) {
      out.dev_rows.push_back(row);
    } else {
      out.test_rows.push_back(row);
    }
  }
  out.train = subset(data, out.train_rows);
  out.dev = subset(data, out.dev_rows);
  out.test = subset(data, out.test_rows);
  return out;
}

DataSplit split_with_test(const MultilabelDataset& train, const MultilabelDataset& test, double dev_fraction,
                          std::uint64_t seed) {
  if (train.num_features() != test.num_features() || train.num_labels() != test.num_labels()) {
    throw ContractViolation("split_with_test: train and test dimensions differ");
  }
  DataSplit out = split(train, {1.0 - dev_fraction, dev_fraction, 0.0}, seed);
  out.test = test;
  out.test_rows.clear();
  for (Eigen::Index i = 0; i < test.size(); ++i) out.test_rows.push_back(i);
  return out;
}

void fit_standardizer(MultilabelDataset& train) {
  if (train.size() == 0) throw ContractViolation("fit_standardizer: empty training split");
  const Vec mean = train.X.colwise().mean().transpose();
  Vec stddev(train.num_features());
  for (Eigen::Index j = 0; j < train.num_features(); ++j) {
    const double var = (train.X.col(j).array() - mean[j]).square().mean();
    const double s = std::sqrt(var);
    stddev[j] = s < 1e-8 ? 1.0 : s;
  }
  apply_standardizer(train, mean, stddev);
}

void apply_standardizer(MultilabelDataset& data, const Vec& mean, const Vec& stddev) {
  if (mean.size() != data.num_features() || stddev.size() != data.num_features()) {
    throw ContractViolation("apply_standardizer: statistics do not match the feature dimension");
  }
  data.X = ((data.X.rowwise() - mean.transpose()).array().rowwise() / stddev.transpose().array()).matrix();
  data.mean = mean;
  data.stddev = stddev;
}

void standardize(DataSplit& s) {
  fit_standardizer(s.train);
  const Vec mean = s.train.mean;
  const Vec stddev = s.train.stddev;
  if (s.dev.size() > 0) apply_standardizer(s.dev, mean, stddev);
  if (s.test.size() > 0) apply_standardizer(s.test, mean, stddev);
}

MultilabelDataset make_planted_pairwise(const PlantedPairwiseSpec& spec) {
  if (spec.n < 1 || spec.d < 1 || spec.k < 1 || spec.k > 20) {
    throw ContractViolation("make_planted_pairwise: need n, d >= 1 and 1 <= k <= 20");
  }
  if (spec.temperature < 0) throw ContractViolation("make_planted_pairwise: temperature must be >= 0");
  Rng rng(spec.seed);
  const double sd = 1.0 / std::sqrt(static_cast<double>(spec.d));
  const Mat Wu = rng.normal_mat(spec.k, spec.d, spec.unary_scale * sd);
  const Vec cu = Vec::Constant(spec.k, spec.unary_bias);
  const Mat Wa = rng.normal_mat(spec.k, spec.d, spec.coupling_scale * sd);
  const Vec ca = Vec::Constant(spec.k, spec.coupling_bias);

  const Eigen::Index states = Eigen::Index{1} << spec.k;
  Mat Ystates(states, spec.k);
  for (Eigen::Index s = 0; s < states; ++s) {
    for (Eigen::Index j = 0; j < spec.k; ++j) Ystates(s, j) = static_cast<double>((s >> j) & 1);
  }

  MultilabelDataset data;
  data.X.resize(spec.n, spec.d);
  data.Y.resize(spec.n, spec.k);
  Vec score(states);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    const Vec x = rng.normal_vec(spec.d);
    const Vec u = Wu * x + cu;
    const Vec a = Wa * x + ca;
    score = Ystates * u - 0.5 * (Ystates * a).array().square().matrix();
    Eigen::Index pick = 0;
    if (spec.temperature == 0.0) {
      score.maxCoeff(&pick);
    } else {
      const Vec w = ((score.array() - score.maxCoeff()) / spec.temperature).exp();
      double r = rng.uniform(0.0, w.sum());
      for (pick = 0; pick < states - 1; ++pick) {
        r -= w[pick];
        if (r < 0) break;
      }
    }
    data.X.row(i) = x.transpose();
    data.Y.row(i) = Ystates.row(pick);
  }
  return data;
}

}  // namespace efy
