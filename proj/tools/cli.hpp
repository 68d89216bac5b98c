#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "efy/calibration.hpp"
#include "efy/conjugate.hpp"
#include "efy/dataset.hpp"
#include "efy/training.hpp"

namespace efy::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDivergence = 3, kCheckFailure = 4 };

/// Collected schema problems; every offending key is listed.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct DatasetConfig {
  bool synthetic = true;
  PlantedPairwiseSpec planted;
  std::string path;
  std::string test_path;
  LibsvmOptions libsvm;
  SplitFractions split = {0.8, 0.0, 0.2};
};

struct GradcheckConfig {
  std::vector<std::string> families = {"bilinear", "linear_quadratic", "pairwise"};
  int instances = 500;
  Eigen::Index dim = 3;
  /// 0 picks 1e-5 for closed-form families and 1e-4 for iterative ones.
  double threshold = 0.0;
};

struct ConjbenchConfig {
  std::string family = "linear_quadratic";
  int instances = 200;
  Eigen::Index dim = 3;
  double tolerance = 1e-6;
};

struct CalibcheckConfig {
  std::string energy = "bilinear";
  Eigen::Index k = 2;
  int distributions = 5;
  /// pairwise: sampled v per distribution
  int samples = 200;
  /// bilinear: grid over [-v_range, v_range]^k
  double grid_step = 0.05;
  double v_range = 3.0;
  double slack = 1e-6;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "efy_out";
  DatasetConfig dataset;
  Problem problem;
  TrainConfig train;
  std::optional<GridSpec> grid;
  GradcheckConfig gradcheck;
  ConjbenchConfig conjbench;
  CalibcheckConfig calibcheck;
  /// FNV-1a 64 of the canonical config JSON, hex.
  std::string hash;
};

std::string fnv1a_hex(const std::string& text);

/// Parses and validates a JSON config document. EFY_SEED (if set) overrides "seed".
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// "# efy config_hash=<hash> seed=<seed>"
std::string provenance_line(const RunConfig& cfg);

/// Entry point shared by the executable and the tests.
int run_cli(int argc, const char* const* argv);

}  // namespace efy::cli
