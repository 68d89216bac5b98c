#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"

namespace efy::cli {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : "\n") + s;
  return out;
}

// Reads one JSON object, recording type errors and unknown keys under a dotted path.
class Section {
 public:
  Section(const json& node, std::string path, std::vector<std::string>& errors)
      : node_(node), path_(std::move(path)), errors_(errors) {
    if (!node_.is_object()) errors_.push_back(where("") + ": expected an object");
  }

  ~Section() {
    if (!node_.is_object()) return;
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) errors_.push_back(where(key) + ": unknown key");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_.is_object() && node_.contains(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    const json& v = node_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) return bad(key, "expected a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) return bad(key, "expected a string");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) return bad(key, "expected a number");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) return bad(key, "expected a nonnegative integer");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) return bad(key, "expected an integer");
    } else {
      if (!v.is_array()) return bad(key, "expected an array");
    }
    try {
      out = v.get<T>();
    } catch (const json::exception& e) {
      bad(key, e.what());
    }
  }

  const json& child(const std::string& key) {
    seen_.insert(key);
    return node_.at(key);
  }

  void bad(const std::string& key, const std::string& msg) { errors_.push_back(where(key) + ": " + msg); }

  std::string where(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const json& node_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

void require(bool ok, Section& s, const std::string& key, const std::string& msg) {
  if (!ok) s.bad(key, msg);
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error("invalid config:\n" + join(problems)), problems_(std::move(problems)) {}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("malformed JSON: ") + e.what()});
  }
  std::vector<std::string> errors;
  RunConfig cfg;
  cfg.hash = fnv1a_hex(doc.dump());
  {
    Section root(doc, "", errors);
    root.get("seed", cfg.seed);
    root.get("output_dir", cfg.output_dir);

    if (root.has("dataset")) {
      Section ds(root.child("dataset"), "dataset", errors);
      auto& d = cfg.dataset;
      if (ds.has("synthetic")) {
        Section syn(ds.child("synthetic"), "dataset.synthetic", errors);
        auto& p = d.planted;
        syn.get("n", p.n);
        syn.get("d", p.d);
        syn.get("k", p.k);
        syn.get("unary_scale", p.unary_scale);
        syn.get("unary_bias", p.unary_bias);
        syn.get("coupling_scale", p.coupling_scale);
        syn.get("coupling_bias", p.coupling_bias);
        syn.get("temperature", p.temperature);
        syn.get("seed", p.seed);
        require(p.n >= 1 && p.d >= 1, syn, "n", "n and d must be >= 1");
        require(p.k >= 1 && p.k <= 20, syn, "k", "must be in [1, 20]");
        require(p.temperature >= 0, syn, "temperature", "must be >= 0");
      }
      ds.get("path", d.path);
      ds.get("test_path", d.test_path);
      ds.get("num_features", d.libsvm.num_features);
      ds.get("num_labels", d.libsvm.num_labels);
      ds.get("one_based_labels", d.libsvm.one_based_labels);
      d.synthetic = d.path.empty();
      if (!d.path.empty() && ds.has("synthetic")) ds.bad("path", "give either a path or a synthetic spec, not both");
      if (ds.has("split")) {
        Section sp(ds.child("split"), "dataset.split", errors);
        sp.get("train", d.split.train);
        sp.get("dev", d.split.dev);
        sp.get("test", d.split.test);
        const bool ok = d.split.train > 0 && d.split.dev >= 0 && d.split.test >= 0 &&
                        d.split.train + d.split.dev + d.split.test <= 1.0 + 1e-12;
        require(ok, sp, "train", "fractions must be nonnegative, train > 0, sum <= 1");
      }
    }

    if (root.has("model")) {
      Section m(root.child("model"), "model", errors);
      auto& spec = cfg.problem.model;
      std::string arch = "unary";
      m.get("architecture", arch);
      if (auto a = architecture_from_name(arch)) {
        spec.architecture = *a;
      } else {
        m.bad("architecture", "unknown architecture '" + arch + "' (unary, pairwise, spen)");
      }
      m.get("hidden", spec.hidden);
      m.get("prior_hidden", spec.prior_hidden);
      m.get("input_concave", spec.input_concave);
      std::string act = "softplus";
      m.get("prior_activation", act);
      if (act == "relu") {
        spec.prior_activation = PriorActivation::Relu;
      } else if (act != "softplus") {
        m.bad("prior_activation", "expected 'softplus' or 'relu'");
      }
      require(spec.hidden >= 0 && spec.prior_hidden >= 0, m, "hidden", "widths must be >= 0");
    }

    if (root.has("regularizer")) {
      Section r(root.child("regularizer"), "regularizer", errors);
      std::string kind = "gini_binary";
      r.get("kind", kind);
      if (auto k = regularizer_kind_from_name(kind)) {
        cfg.problem.regularizer = *k;
      } else {
        r.bad("kind", "unknown regularizer '" + kind + "'");
      }
      r.get("gamma", cfg.train.gamma);
      require(cfg.train.gamma > 0, r, "gamma", "must be > 0");
    }

    if (root.has("loss")) {
      std::string loss;
      root.get("loss", loss);
      if (auto l = loss_kind_from_name(loss)) {
        cfg.problem.loss = *l;
      } else {
        root.bad("loss", "unknown loss '" + loss + "' (gfy, perceptron, energy, xent)");
      }
    }

    if (root.has("train")) {
      Section t(root.child("train"), "train", errors);
      auto& tc = cfg.train;
      t.get("lambda", tc.lambda);
      t.get("learning_rate", tc.learning_rate);
      t.get("batch_size", tc.batch_size);
      t.get("epochs", tc.epochs);
      t.get("beta1", tc.adam.beta1);
      t.get("beta2", tc.adam.beta2);
      t.get("eps", tc.adam.eps);
      std::string path = "envelope";
      t.get("gradient_path", path);
      if (path == "argmax_fd") {
        tc.gradient_path = GradientPath::ArgmaxFiniteDifference;
      } else if (path != "envelope") {
        t.bad("gradient_path", "expected 'envelope' or 'argmax_fd'");
      }
      require(tc.lambda >= 0, t, "lambda", "must be >= 0");
      require(tc.learning_rate > 0, t, "learning_rate", "must be > 0");
      require(tc.batch_size >= 1, t, "batch_size", "must be >= 1");
      require(tc.epochs >= 0, t, "epochs", "must be >= 0");
      require(tc.adam.beta1 >= 0 && tc.adam.beta1 < 1, t, "beta1", "must be in [0, 1)");
      require(tc.adam.beta2 >= 0 && tc.adam.beta2 < 1, t, "beta2", "must be in [0, 1)");
      require(tc.adam.eps > 0, t, "eps", "must be > 0");
    }

    if (root.has("solver")) {
      Section s(root.child("solver"), "solver", errors);
      auto& sc = cfg.train.solver;
      s.get("max_iters", sc.max_iters);
      s.get("tolerance", sc.tolerance);
      s.get("initial_step", sc.initial_step);
      s.get("shrink", sc.shrink);
      s.get("sufficient_increase", sc.sufficient_increase);
      s.get("max_shrinks", sc.max_shrinks);
      s.get("max_sweeps", sc.max_sweeps);
      try {
        sc.validate();
      } catch (const std::exception& e) {
        s.bad("tolerance", e.what());
      }
    }

    if (root.has("grid")) {
      Section g(root.child("grid"), "grid", errors);
      GridSpec grid;
      g.get("lambdas", grid.lambdas);
      g.get("learning_rates", grid.learning_rates);
      g.get("seeds", grid.seeds);
      g.get("dev_fraction", grid.dev_fraction);
      require(!grid.lambdas.empty() && !grid.learning_rates.empty() && !grid.seeds.empty(), g, "lambdas",
              "grid lists must be nonempty");
      for (double l : grid.lambdas) require(l >= 0, g, "lambdas", "entries must be >= 0");
      for (double r : grid.learning_rates) require(r > 0, g, "learning_rates", "entries must be > 0");
      require(grid.dev_fraction > 0 && grid.dev_fraction < 1, g, "dev_fraction", "must be in (0, 1)");
      cfg.grid = grid;
    }

    if (root.has("gradcheck")) {
      Section g(root.child("gradcheck"), "gradcheck", errors);
      auto& gc = cfg.gradcheck;
      g.get("families", gc.families);
      g.get("instances", gc.instances);
      g.get("dim", gc.dim);
      g.get("threshold", gc.threshold);
      for (const auto& f : gc.families) {
        require(energy_kind_from_name(f).has_value(), g, "families", "unknown energy family '" + f + "'");
      }
      require(gc.instances >= 1, g, "instances", "must be >= 1");
      require(gc.dim >= 1 && gc.dim <= 8, g, "dim", "must be in [1, 8]");
      require(gc.threshold >= 0, g, "threshold", "must be >= 0");
    }

    if (root.has("conjbench")) {
      Section c(root.child("conjbench"), "conjbench", errors);
      auto& cb = cfg.conjbench;
      c.get("family", cb.family);
      c.get("instances", cb.instances);
      c.get("dim", cb.dim);
      c.get("tolerance", cb.tolerance);
      require(cb.family == "linear_quadratic" || cb.family == "pairwise" || cb.family == "bilinear", c, "family",
              "expected linear_quadratic, pairwise or bilinear");
      require(cb.instances >= 1, c, "instances", "must be >= 1");
      require(cb.dim >= 1 && cb.dim <= 8, c, "dim", "must be in [1, 8]");
      require(cb.tolerance > 0, c, "tolerance", "must be > 0");
    }

    if (root.has("calibcheck")) {
      Section c(root.child("calibcheck"), "calibcheck", errors);
      auto& cc = cfg.calibcheck;
      c.get("energy", cc.energy);
      c.get("k", cc.k);
      c.get("distributions", cc.distributions);
      c.get("samples", cc.samples);
      c.get("grid_step", cc.grid_step);
      c.get("v_range", cc.v_range);
      c.get("slack", cc.slack);
      require(cc.energy == "bilinear" || cc.energy == "pairwise", c, "energy", "expected bilinear or pairwise");
      require(cc.k >= 1 && cc.k <= 3, c, "k", "must be in [1, 3]");
      require(cc.distributions >= 1 && cc.samples >= 1, c, "samples", "counts must be >= 1");
      require(cc.grid_step > 0 && cc.v_range > 0, c, "grid_step", "grid_step and v_range must be > 0");
      require(cc.slack >= 0, c, "slack", "must be >= 0");
    }
  }
  if (!errors.empty()) throw ConfigError(errors);

  if (const char* env = std::getenv("EFY_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long long s = std::strtoull(env, &end, 10);
    if (end == nullptr || *end != '\0') throw ConfigError({"EFY_SEED: expected a nonnegative integer"});
    cfg.seed = s;
  }
  cfg.train.seed = cfg.seed;
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file '" + path + "'"});
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string provenance_line(const RunConfig& cfg) {
  return "# efy config_hash=" + cfg.hash + " seed=" + std::to_string(cfg.seed);
}

}  // namespace efy::cli
