#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cli.hpp"
#include "efy/losses.hpp"

namespace efy::cli {

namespace {

namespace fs = std::filesystem;

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string join_vec(const Vec& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? ";" : "") + fmt(v[i]);
  return out;
}

std::ofstream open_output(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.output_dir);
  const fs::path path = fs::path(cfg.output_dir) / name;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << provenance_line(cfg) << '\n';
  return out;
}

// ---- datasets ------------------------------------------------------------

struct LoadedData {
  DataSplit raw;
  DataSplit standardized;
};

LoadedData load_data(const RunConfig& cfg) {
  const auto& d = cfg.dataset;
  LoadedData out;
  if (d.synthetic) {
    out.raw = split(make_planted_pairwise(d.planted), d.split, cfg.seed);
  } else {
    const MultilabelDataset all = load_libsvm_multilabel(d.path, d.libsvm);
    if (!d.test_path.empty()) {
      LibsvmOptions opts = d.libsvm;
      opts.num_features = all.num_features();
      opts.num_labels = all.num_labels();
      const MultilabelDataset test = load_libsvm_multilabel(d.test_path, opts);
      const double total = d.split.train + d.split.dev;
      out.raw = split_with_test(all, test, total > 0 ? d.split.dev / total : 0.0, cfg.seed);
    } else {
      out.raw = split(all, d.split, cfg.seed);
    }
  }
  out.standardized = out.raw;
  standardize(out.standardized);
  return out;
}

Problem resolved_problem(const RunConfig& cfg, const MultilabelDataset& data) {
  Problem p = cfg.problem;
  p.model.input_dim = data.num_features();
  p.model.num_labels = data.num_labels();
  p.model = resolve_spec(p.model);
  return p;
}

// ---- train / eval --------------------------------------------------------

int cmd_train(const RunConfig& cfg) {
  const LoadedData data = load_data(cfg);
  const Problem problem = resolved_problem(cfg, data.standardized.train);
  const auto& s = data.standardized;
  TrainReport report;
  std::optional<SearchResult> search;
  if (cfg.grid) {
    search = hyperparam_search(data.raw.train, data.raw.test, problem, cfg.train, *cfg.grid);
    report = search->refits.front();
    auto out = open_output(cfg, "grid.csv");
    out << "lambda,learning_rate,dev_acc,diverged\n";
    for (const auto& c : search->table) {
      out << fmt(c.lambda) << ',' << fmt(c.learning_rate) << ',' << fmt(c.dev_accuracy) << ',' << c.diverged << '\n';
    }
  } else {
    report = train(s.train, s.dev.size() > 0 ? &s.dev : nullptr, problem, cfg.train);
  }
  {
    auto out = open_output(cfg, "metrics.csv");
    write_metrics_csv(out, report);
  }
  const TrainConfig used = search ? search->best_config : cfg.train;
  nlohmann::ordered_json summary;
  summary["provenance"] = {{"config_hash", cfg.hash}, {"seed", cfg.seed}};
  summary["report"] = nlohmann::json::parse(report_summary_json(report, problem, used));
  if (s.test.size() > 0) {
    const double acc = search ? search->mean_test_accuracy
                              : evaluate_accuracy(report.params, problem, s.test, used.gamma, used.solver);
    summary["test_accuracy"] = acc;
    std::cout << "test_accuracy " << fmt(acc) << '\n';
  }
  if (search) {
    summary["selected"] = {{"lambda", used.lambda}, {"learning_rate", used.learning_rate}};
    summary["test_accuracy_per_seed"] = search->test_accuracy;
  }
  {
    fs::create_directories(cfg.output_dir);
    std::ofstream out(fs::path(cfg.output_dir) / "summary.json");
    out << summary.dump() << '\n';
  }
  save_params((fs::path(cfg.output_dir) / "params.bin").string(), report.params);
  if (!report.epoch_loss.empty()) std::cout << "final_loss " << fmt(report.epoch_loss.back()) << '\n';
  std::cout << "wrote " << cfg.output_dir << "/{metrics.csv,summary.json,params.bin}\n";
  return kOk;
}

int cmd_eval(const RunConfig& cfg, const std::string& params_path) {
  if (!fs::exists(params_path)) throw ConfigError({"params file '" + params_path + "' does not exist"});
  ModelParams params;
  try {
    params = load_params(params_path);
  } catch (const std::exception& e) {
    throw ConfigError({std::string("cannot load params: ") + e.what()});
  }
  const LoadedData data = load_data(cfg);
  const MultilabelDataset& test = data.standardized.test.size() > 0 ? data.standardized.test : data.standardized.dev;
  if (test.size() == 0) throw ConfigError({"dataset.split: eval needs a nonempty test or dev split"});
  if (params.spec.input_dim != test.num_features() || params.spec.num_labels != test.num_labels()) {
    throw ConfigError({"params shape does not match the dataset"});
  }
  Problem problem = cfg.problem;
  problem.model = params.spec;
  const Mat soft = predict_soft(params, problem, test, cfg.train.gamma, cfg.train.solver);
  Mat hard(soft.rows(), soft.cols());
  auto out = open_output(cfg, "predictions.csv");
  out << "row";
  for (Eigen::Index j = 0; j < soft.cols(); ++j) out << ",p" << j + 1;
  for (Eigen::Index j = 0; j < soft.cols(); ++j) out << ",yhat" << j + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < soft.rows(); ++i) {
    hard.row(i) = decode_threshold(soft.row(i).transpose()).transpose();
    out << i;
    for (Eigen::Index j = 0; j < soft.cols(); ++j) out << ',' << fmt(soft(i, j));
    for (Eigen::Index j = 0; j < soft.cols(); ++j) out << ',' << static_cast<int>(hard(i, j));
    out << '\n';
  }
  const double acc = accuracy(hard, test.Y);
  std::cout << "accuracy " << fmt(acc) << '\n';
  return kOk;
}

// ---- gradcheck -----------------------------------------------------------

struct Instance {
  Energy energy;
  Regularizer reg;
  EnergyInput v;
  Vec y;
};

Regularizer config_regularizer(const RunConfig& cfg, Eigen::Index k) {
  const auto kind = cfg.problem.regularizer;
  const OutputSet set = kind == Regularizer::Kind::ShannonSimplex ? OutputSet::simplex(k) : OutputSet::box01(k);
  if (kind == Regularizer::Kind::Indicator) return Regularizer::indicator(set);
  return Regularizer::make(kind, cfg.train.gamma, set);
}

Vec random_label(const Regularizer& reg, Rng& rng) {
  const Eigen::Index k = reg.dim();
  if (reg.domain().kind() == OutputSet::Kind::Simplex) {
    Vec y = Vec::Zero(k);
    y[static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(k)))] = 1.0;
    return y;
  }
  if (reg.domain().kind() == OutputSet::Kind::Reals) return rng.normal_vec(k);
  Vec y(k);
  for (Eigen::Index j = 0; j < k; ++j) y[j] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return y;
}

// True when a +-1e-3 nudge of the linear coefficient changes which
// coordinates of the closed-form map sit on the boundary.
bool near_kink(const Regularizer& reg, const Vec& c) {
  if (reg.domain().kind() != OutputSet::Kind::Box) return false;
  auto active = [&](const Vec& p) {
    std::vector<int> a(static_cast<std::size_t>(p.size()));
    for (Eigen::Index j = 0; j < p.size(); ++j) {
      a[static_cast<std::size_t>(j)] =
          p[j] <= reg.domain().lower()[j] ? -1 : (p[j] >= reg.domain().upper()[j] ? 1 : 0);
    }
    return a;
  };
  const auto base = active(reg.closed_form_map(c));
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    for (double d : {-1e-3, 1e-3}) {
      Vec n = c;
      n[j] += d;
      if (active(reg.closed_form_map(n)) != base) return true;
    }
  }
  return false;
}

Instance random_instance(Energy::Kind kind, Eigen::Index dim, const RunConfig& cfg, Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    switch (kind) {
      case Energy::Kind::Bilinear: {
        const Regularizer reg = config_regularizer(cfg, dim);
        Instance in{Energy::bilinear(rng.normal_mat(dim, dim)), reg, Vec(rng.normal_vec(dim, 2.0)), Vec()};
        in.y = random_label(reg, rng);
        if (reg.has_closed_form() && near_kink(reg, in.energy.linear_coefficient(in.v))) continue;
        return in;
      }
      case Energy::Kind::LinearQuadratic: {
        const Mat B = rng.normal_mat(dim, dim);
        const Mat A = 0.5 * (B + B.transpose());
        const double gamma = max_eigenvalue(A) + rng.uniform(0.5, 2.0);
        const Regularizer reg = Regularizer::squared_l2(gamma, OutputSet::reals(dim));
        return {Energy::linear_quadratic(dim), reg, QuadraticInput{A, rng.normal_vec(dim)}, rng.normal_vec(dim)};
      }
      case Energy::Kind::PairwiseMultilabel: {
        const Vec a = rng.normal_vec(dim);
        const Mat B = rng.normal_mat(dim, dim);
        const Mat A = -a * a.transpose() - 0.1 * B * B.transpose();
        const Regularizer reg = config_regularizer(cfg, dim);
        Instance in{Energy::pairwise_multilabel(dim), reg, QuadraticInput{A, rng.normal_vec(dim, 2.0)}, Vec()};
        in.y = random_label(reg, rng);
        return in;
      }
      case Energy::Kind::Rectifier: {
        const Regularizer reg = config_regularizer(cfg, dim);
        const Vec v = rng.normal_vec(dim, 2.0);
        if (v.cwiseAbs().minCoeff() < 1e-3) continue;
        Instance in{Energy::rectifier(rng.uniform_mat(dim, dim, 0.0, 1.0)), reg, v, random_label(reg, rng)};
        if (reg.has_closed_form() && near_kink(reg, in.energy.linear_coefficient(in.v))) continue;
        return in;
      }
      case Energy::Kind::Maxout:
      case Energy::Kind::LseNet: {
        const Regularizer reg = config_regularizer(cfg, 1);
        Vec v = rng.normal_vec(dim, 2.0);
        if (kind == Energy::Kind::Maxout && dim > 1) {
          Vec sorted = v;
          std::sort(sorted.begin(), sorted.end());
          if (sorted[dim - 1] - sorted[dim - 2] < 1e-3) continue;
        }
        Energy e = kind == Energy::Kind::Maxout ? Energy::maxout(dim) : Energy::lse_net(dim, 1.0);
        Instance in{std::move(e), reg, v, random_label(reg, rng)};
        if (reg.has_closed_form() && near_kink(reg, in.energy.linear_coefficient(in.v))) continue;
        return in;
      }
      case Energy::Kind::Spen: {
        const Eigen::Index m = 4;
        const Regularizer reg = config_regularizer(cfg, dim);
        PriorWeights w{rng.normal_mat(m, dim), rng.normal_vec(m), rng.normal_vec(m), rng.normal()};
        Instance in{Energy::spen(dim, m, true), reg, SpenInput{rng.normal_vec(dim, 2.0), w}, Vec()};
        in.y = random_label(reg, rng);
        return in;
      }
    }
  }
  throw std::runtime_error("gradcheck: could not sample an instance away from kinks");
}

double rel_err(const Vec& a, const Vec& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-3});
}

int cmd_gradcheck(const RunConfig& cfg) {
  const auto& gc = cfg.gradcheck;
  const SolverConfig solver = cfg.train.solver;
  Rng rng(cfg.seed);
  auto out = open_output(cfg, "gradcheck.csv");
  out << "family,instance,solver,rel_err\n";
  bool all_ok = true;
  for (const auto& name : gc.families) {
    const Energy::Kind kind = *energy_kind_from_name(name);
    double worst = 0.0;
    bool closed_form = true;
    for (int i = 0; i < gc.instances; ++i) {
      const Instance in = random_instance(kind, gc.dim, cfg, rng);
      const LossEval loss = gfy_loss(in.energy, in.reg, in.v, in.y, solver);
      const std::string used = loss.conjugate->solver;
      closed_form = closed_form && used == "closed_form";
      auto value = [&](const Vec& w) {
        return gfy_loss(in.energy, in.reg, unflatten_like(in.v, w), in.y, solver).value;
      };
      const double err = rel_err(flatten(loss.grad_v), finite_diff_grad(value, flatten(in.v)));
      worst = std::max(worst, err);
      out << name << ',' << i << ',' << used << ',' << fmt(err) << '\n';
    }
    const double threshold = gc.threshold > 0 ? gc.threshold : (closed_form ? 1e-5 : 1e-4);
    const bool ok = worst <= threshold;
    all_ok = all_ok && ok;
    std::cout << "family=" << name << " instances=" << gc.instances << " max_rel_err=" << fmt(worst)
              << " threshold=" << fmt(threshold) << (ok ? " PASS" : " FAIL") << '\n';
  }
  return all_ok ? kOk : kCheckFailure;
}

// ---- conjbench -----------------------------------------------------------

int cmd_conjbench(const RunConfig& cfg) {
  const auto& cb = cfg.conjbench;
  Rng rng(cfg.seed);
  SolverConfig tight = cfg.train.solver;
  tight.tolerance = std::min(tight.tolerance, 1e-10);
  tight.max_iters = std::max(tight.max_iters, 100000);
  auto out = open_output(cfg, "conjbench.csv");
  out << "instance,family,reference_solver,value_reference,value_pga,value_diff,argmax_diff,pga_iters,"
         "reference_us,pga_us\n";
  double worst = 0.0;
  using clock = std::chrono::steady_clock;
  auto micros = [](clock::duration d) { return std::chrono::duration<double, std::micro>(d).count(); };
  for (int i = 0; i < cb.instances; ++i) {
    const Eigen::Index k = cb.dim;
    Energy energy = Energy::linear_quadratic(k);
    Regularizer reg = config_regularizer(cfg, k);
    EnergyInput v;
    if (cb.family == "linear_quadratic") {
      const Mat B = rng.normal_mat(k, k);
      const Mat A = 0.5 * (B + B.transpose());
      reg = Regularizer::squared_l2(max_eigenvalue(A) + rng.uniform(0.5, 2.0), OutputSet::reals(k));
      v = QuadraticInput{A, rng.normal_vec(k)};
    } else if (cb.family == "pairwise") {
      energy = Energy::pairwise_multilabel(k);
      const Vec a = rng.normal_vec(k);
      v = QuadraticInput{-a * a.transpose(), rng.normal_vec(k, 2.0)};
    } else {
      energy = Energy::bilinear(rng.normal_mat(k, k));
      v = Vec(rng.normal_vec(k, 2.0));
    }
    auto t0 = clock::now();
    const ConjugateResult ref = conjugate(energy, reg, v, tight);
    auto t1 = clock::now();
    const Vec start = reg.domain().kind() == OutputSet::Kind::Reals ? Vec(Vec::Zero(k)) : reg.domain().center();
    const AscentResult pga = projected_gradient_ascent(
        [&](const Vec& p) { return energy.value(v, p) - reg.value(p); },
        [&](const Vec& p) -> Vec { return energy.grad_p(v, p) - reg.gradient(p); }, reg.domain(), start, tight,
        reg.interior_margin());
    auto t2 = clock::now();
    const double value_diff = std::abs(ref.value - pga.objective);
    const double argmax_diff = (ref.argmax - pga.point).lpNorm<Eigen::Infinity>();
    worst = std::max({worst, value_diff, argmax_diff});
    out << i << ',' << cb.family << ',' << ref.solver << ',' << fmt(ref.value) << ',' << fmt(pga.objective) << ','
        << fmt(value_diff) << ',' << fmt(argmax_diff) << ',' << pga.status.iterations << ','
        << fmt(micros(t1 - t0)) << ',' << fmt(micros(t2 - t1)) << '\n';
  }
  const bool ok = worst <= cb.tolerance;
  std::cout << "family=" << cb.family << " instances=" << cb.instances << " max_diff=" << fmt(worst)
            << " tolerance=" << fmt(cb.tolerance) << (ok ? " PASS" : " FAIL") << '\n';
  return ok ? kOk : kCheckFailure;
}

// ---- calibcheck ----------------------------------------------------------

std::vector<EnergyInput> bilinear_grid(Eigen::Index k, double range, double step) {
  const auto per_axis = static_cast<Eigen::Index>(std::floor(2.0 * range / step + 1e-9)) + 1;
  std::vector<EnergyInput> out;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(k), 0);
  while (true) {
    Vec v(k);
    for (Eigen::Index j = 0; j < k; ++j) v[j] = -range + step * static_cast<double>(idx[static_cast<std::size_t>(j)]);
    out.emplace_back(v);
    Eigen::Index j = 0;
    while (j < k && ++idx[static_cast<std::size_t>(j)] == per_axis) idx[static_cast<std::size_t>(j++)] = 0;
    if (j == k) break;
  }
  return out;
}

int cmd_calibcheck(const RunConfig& cfg) {
  const auto& cc = cfg.calibcheck;
  const Eigen::Index k = cc.k;
  if (cfg.problem.regularizer == Regularizer::Kind::Indicator ||
      cfg.problem.regularizer == Regularizer::Kind::ShannonSimplex) {
    throw ConfigError({"calibcheck: regularizer must be strongly convex over [0,1]^k"});
  }
  const Regularizer reg = config_regularizer(cfg, k);
  const Energy energy = cc.energy == "bilinear" ? Energy::bilinear(Mat::Identity(k, k)) : Energy::pairwise_multilabel(k);
  const AffineLossDecomposition decomp = hamming_decomposition(k);
  Rng rng(cfg.seed);
  CalibrationOptions opts;
  opts.slack = cc.slack;
  opts.seed = cfg.seed;
  opts.solver = cfg.train.solver;
  opts.solver.tolerance = std::min(opts.solver.tolerance, 1e-10);

  auto out = open_output(cfg, "calibcheck.csv");
  out << "distribution,v,target_excess,surrogate_excess,xi,ok\n";
  std::size_t points = 0;
  std::size_t violations = 0;
  double worst = -kInf;
  double M = 0.0;
  double sigma = 0.0;
  for (int dist = 0; dist < cc.distributions; ++dist) {
    const LabelDistribution q = random_label_distribution(k, rng);
    std::vector<EnergyInput> samples;
    if (cc.energy == "bilinear") {
      samples = bilinear_grid(k, cc.v_range, cc.grid_step);
    } else {
      for (int s = 0; s < cc.samples; ++s) {
        const Vec a = rng.normal_vec(k);
        samples.emplace_back(QuadraticInput{-a * a.transpose(), rng.normal_vec(k, cc.v_range / 1.5)});
      }
    }
    opts.seed = cfg.seed + static_cast<std::uint64_t>(dist);
    const CalibrationReport report = calibration_check(energy, reg, decomp, q, samples, opts);
    for (const auto& pt : report.points) {
      out << dist << ',' << join_vec(flatten(pt.v)) << ',' << fmt(pt.target_excess) << ','
          << fmt(pt.surrogate_excess) << ',' << fmt(pt.xi) << ',' << (pt.ok ? 1 : 0) << '\n';
    }
    points += report.points.size();
    violations += report.violations;
    worst = std::max(worst, report.worst_margin);
    M = std::max(M, report.M);
    sigma = report.sigma;
  }
  std::cout << "energy=" << cc.energy << " k=" << k << " points=" << points << " violations=" << violations
            << " sigma=" << fmt(sigma) << " M=" << fmt(M) << " worst_margin=" << fmt(worst)
            << (violations == 0 ? " PASS" : " FAIL") << '\n';
  return violations == 0 ? kOk : kCheckFailure;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"efy: regularized energy networks trained with generalized Fenchel-Young losses"};
  app.require_subcommand(1);
  std::string config_path;
  std::string output_override;
  std::string params_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON run config")->required();
    sub->add_option("-o,--output", output_override, "output directory (overrides output_dir)");
  };
  CLI::App* train_cmd = app.add_subcommand("train", "train a model (grid search when the config has a grid)");
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate saved params on the test split");
  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "envelope vs finite-difference loss gradients");
  CLI::App* bench_cmd = app.add_subcommand("conjbench", "reference conjugate solvers vs projected gradient ascent");
  CLI::App* calib_cmd = app.add_subcommand("calibcheck", "verify xi(target excess) <= surrogate excess");
  for (CLI::App* sub : {train_cmd, eval_cmd, grad_cmd, bench_cmd, calib_cmd}) add_common(sub);
  eval_cmd->add_option("-p,--params", params_path, "params file written by train")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    RunConfig cfg = load_config(config_path);
    if (!output_override.empty()) cfg.output_dir = output_override;
    if (train_cmd->parsed()) return cmd_train(cfg);
    if (eval_cmd->parsed()) return cmd_eval(cfg, params_path);
    if (grad_cmd->parsed()) return cmd_gradcheck(cfg);
    if (bench_cmd->parsed()) return cmd_conjbench(cfg);
    if (calib_cmd->parsed()) return cmd_calibcheck(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ContractViolation& e) {
    std::cerr << "error: invalid configuration: " << e.what() << '\n';
    return kConfigError;
  } catch (const ParseError& e) {
    std::cerr << "error: dataset: " << e.what() << '\n';
    return kConfigError;
  } catch (const DivergenceError& e) {
    std::cerr << "error: numerical divergence: " << e.what() << '\n';
    return kDivergence;
  } catch (const InfeasibleError& e) {
    std::cerr << "error: numerical divergence: " << e.what() << '\n';
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCheckFailure;
  }
  return kConfigError;
}

}  // namespace efy::cli
