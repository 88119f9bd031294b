// care: multi-judge score aggregation with latent confounder modeling.
//
// Subcommands:
//   aggregate    score a CSV of judge scores with a chosen aggregator
//   synth        generate the synthetic benchmark datasets
//   bench        run the synthetic benchmark experiments
//   check-theory run the empirical checks of the theoretical guarantees

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "care/baselines.hpp"
#include "care/harness.hpp"
#include "care/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("CARE_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      throw std::invalid_argument("CARE_SEED is not an unsigned integer");
    }
  }
  return 0;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw std::invalid_argument("cannot write " + path.string());
  f << j.dump(2) << "\n";
}

fs::path ensure_out(const std::string& out) {
  fs::path p(out);
  fs::create_directories(p);
  return p;
}

struct AggregateArgs {
  std::string input;
  std::string method = "care-svd";
  std::string out = ".";
  std::optional<std::string> truth_col;
  std::string rule = "leading";
  double gamma_n = 1.0;
  double tau = 1.0;
  double eps = 1e-3;
  int restarts = 16;
  double val_frac = 0.15;
  std::uint64_t seed = 0;
};

int run_aggregate(const AggregateArgs& a) {
  care::LoadResult loaded = care::load_csv(a.input, a.truth_col);
  care::ScoreMatrix& m = loaded.matrix;
  const bool have_truth = m.truth.has_value();

  json report;
  report["schema"] = care::kReportSchema;
  report["method"] = a.method;
  report["seed"] = a.seed;
  report["config"] = {{"input", a.input},
                      {"method", a.method},
                      {"rule", a.rule},
                      {"gamma_n", a.gamma_n},
                      {"tau", a.tau},
                      {"eps", a.eps},
                      {"restarts", a.restarts},
                      {"val_frac", a.val_frac},
                      {"truth_column", a.truth_col ? json(*a.truth_col) : json()},
                      {"dropped_rows", loaded.dropped_rows}};
  json params = {{"gamma_n", a.gamma_n}, {"tau", a.tau}};

  Eigen::VectorXd scores;
  if (a.method == "avg") {
    scores = care::avg(m).scores;
  } else if (a.method == "mv") {
    care::BaselineOutput o = care::mv(m);
    scores = o.scores;
    report["tie_warning"] = o.tie_warning;
  } else if (a.method == "ds") {
    scores = care::dawid_skene(m).posterior;
  } else if (a.method == "care-svd") {
    care::SvdOptions opt;
    opt.gamma_n = a.gamma_n;
    opt.tau = a.tau;
    opt.rule = a.rule == "balanced" ? care::SymmetryRule::balanced
                                    : care::SymmetryRule::leading;
    if (have_truth) {
      care::Split split = care::make_split(m.n(), a.val_frac, a.seed);
      auto gs = care::grid_search(m, care::Method::svd, care::svd_grid(), split);
      opt.gamma_n = gs.best.gamma_n;
      opt.tau = gs.best.tau;
      params = {{"gamma_n", opt.gamma_n}, {"tau", opt.tau}};
      report["grid_search"] = {{"best_metric", gs.best_metric},
                               {"maximize", gs.maximize}};
    }
    care::SvdResult fit = care::care_svd(m, opt);
    scores = fit.estimates.scores;
    report["calibration"] = {{"a", fit.estimates.calib_a},
                             {"b", fit.estimates.calib_b}};
    report["quality_index"] = fit.factors.quality_index;
  } else if (a.method == "care-tensor") {
    care::TensorOptions opt;
    opt.gamma_n = a.gamma_n;
    opt.tau = a.tau;
    opt.eps = a.eps;
    opt.restarts = a.restarts;
    opt.seed = a.seed;
    if (have_truth) {
      care::Split split = care::make_split(m.n(), a.val_frac, a.seed);
      auto gs = care::grid_search(m, care::Method::tensor, care::tensor_grid(),
                                  split, opt);
      opt.gamma_n = gs.best.gamma_n;
      opt.tau = gs.best.tau;
      params = {{"gamma_n", opt.gamma_n}, {"tau", opt.tau}};
    }
    care::TensorResult fit = care::care_tensor(m, opt);
    scores = fit.post.quality_prob;
    report["partition"] = {{"groups",
                            {fit.part.groups[0], fit.part.groups[1],
                             fit.part.groups[2]}},
                           {"cross_mass", fit.part.cross_mass},
                           {"feasible", fit.part.feasible}};
    report["cp_fit"] = fit.cp.fit;
  } else {
    throw std::invalid_argument("unknown method: " + a.method);
  }

  report["params"] = params;
  json metrics = json::object();
  if (have_truth) {
    const Eigen::VectorXd& t = *m.truth;
    bool binary = true;
    for (int i = 0; i < t.size(); ++i)
      if (t(i) != 0.0 && t(i) != 1.0) binary = false;
    if (binary) {
      Eigen::VectorXd labels =
          a.method == "care-tensor"
              ? (scores.array() > 0.5).cast<double>().matrix()
              : (a.method == "mv" || a.method == "ds"
                     ? (scores.array() > 0.5).cast<double>().matrix()
                     : care::median_threshold(scores));
      metrics["accuracy"] = care::accuracy(labels, t);
    } else {
      metrics["mae"] = care::mae(scores, t);
    }
  }
  report["metrics"] = metrics;
  report["per_item_scores"] =
      std::vector<double>(scores.data(), scores.data() + scores.size());

  fs::path out = ensure_out(a.out);
  care::ScoreMatrix result;
  result.values = scores;
  result.judge_names = {"score"};
  if (have_truth) result.truth = m.truth;
  care::save_csv((out / "scores.csv").string(), result);
  write_json(out / "report.json", report);
  std::cout << "wrote " << (out / "report.json").string() << "\n";
  return kExitOk;
}

int run_synth(const std::string& regime, std::uint64_t seed, int n,
              double level, const std::string& out_dir) {
  fs::path out = ensure_out(out_dir);
  care::ScoreMatrix data;
  json meta = {{"regime", regime}, {"seed", seed}};
  if (regime == "second-order") {
    care::RegimeAConfig cfg;
    cfg.seed = seed;
    cfg.g = level;
    if (n > 0) cfg.n = n;
    data = care::gen_regime_a(cfg).scores;
    meta["n"] = cfg.n;
    meta["confounder_strength"] = cfg.g;
  } else if (regime == "third-order") {
    care::RegimeBConfig cfg;
    cfg.seed = seed;
    cfg.strength = level;
    if (n > 0) cfg.n = n;
    data = care::gen_regime_b(cfg).scores;
    meta["n"] = cfg.n;
    meta["confounder_strength"] = cfg.strength;
  } else if (regime == "graph") {
    care::PlantedGraphConfig cfg;
    cfg.seed = seed;
    if (n > 0) cfg.n = n;
    data = care::gen_planted_graph(cfg).scores;
    meta["n"] = cfg.n;
  } else if (regime == "gaussian") {
    care::GaussianModelConfig cfg;
    cfg.seed = seed;
    cfg.n = n > 0 ? n : 10000;
    care::GaussianModelData d = care::gen_gaussian_model(cfg);
    data.values = d.samples;
    data.judge_names.resize(cfg.p);
    for (int j = 0; j < cfg.p; ++j)
      data.judge_names[j] = "judge_" + std::to_string(j);
    data.truth = d.latents.col(0);
    meta["n"] = cfg.n;
  } else {
    throw std::invalid_argument("unknown regime: " + regime);
  }
  care::save_csv((out / "data.csv").string(), data);
  write_json(out / "meta.json", meta);
  std::cout << "wrote " << (out / "data.csv").string() << "\n";
  return kExitOk;
}

int run_bench(const std::string& experiment, int seeds, std::uint64_t seed0,
              const std::string& out_dir) {
  fs::path out = ensure_out(out_dir);
  json report;
  if (experiment == "partition") {
    care::PartitionStudyResult r =
        care::run_partition_study(seeds > 0 ? seeds : 10, {}, seed0);
    report = r.report.to_json();
    std::cout << "graph-aware median error:  " << r.median_graph << "\n"
              << "random median error:       " << r.median_random << "\n"
              << "error ratio (random/graph): " << r.ratio << "\n";
  } else if (experiment == "second-order" || experiment == "third-order") {
    care::SweepResult r =
        experiment == "second-order"
            ? care::run_sweep_second_order(seeds > 0 ? seeds : 10, {}, {}, seed0)
            : care::run_sweep_third_order(seeds > 0 ? seeds : 25, {}, {}, seed0);
    report["schema"] = care::kReportSchema;
    report["levels"] = r.levels;
    for (const auto& rep : r.reports) report["methods"].push_back(rep.to_json());
    for (const auto& rep : r.reports)
      std::cout << rep.method << " accuracy at max confounding: " << rep.mean()
                << "\n";
  } else {
    throw std::invalid_argument("unknown experiment: " + experiment);
  }
  write_json(out / ("bench_" + experiment + ".json"), report);
  return kExitOk;
}

int run_check_theory(int seeds, std::uint64_t seed0, const std::string& out_dir) {
  fs::path out = ensure_out(out_dir);
  std::vector<care::TheoremCheck> checks = care::theorem_suite(seeds, seed0);
  json report = care::theorem_report(checks);
  report["config"] = {{"seeds", seeds}, {"seed0", seed0}};
  write_json(out / "theory.json", report);
  bool all = true;
  for (const auto& c : checks) {
    std::cout << (c.passed ? "PASS" : "FAIL") << "  " << c.name
              << "  (worst margin " << c.worst_margin << ")\n";
    all = all && c.passed;
  }
  return all ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-judge score aggregation with latent confounder modeling"};
  app.require_subcommand(1);

  AggregateArgs agg;
  std::string synth_regime = "graph", bench_exp = "partition";
  std::string synth_out = ".", bench_out = ".", theory_out = ".";
  int synth_n = 0, bench_seeds = 0, theory_seeds = 10;
  double synth_level = 1.0;
  std::uint64_t seed = 0;

  CLI::App* c_agg = app.add_subcommand("aggregate", "score a judge-score CSV");
  c_agg->add_option("input", agg.input, "input CSV path")->required();
  c_agg->add_option("--method", agg.method,
                    "avg | mv | ds | care-svd | care-tensor");
  c_agg->add_option("--truth-col", agg.truth_col, "ground-truth column name");
  c_agg->add_option("--out", agg.out, "output directory");
  c_agg->add_option("--rule", agg.rule, "factor selection: leading | balanced");
  c_agg->add_option("--gamma", agg.gamma_n, "sparse penalty");
  c_agg->add_option("--tau", agg.tau, "nuclear/sparse penalty ratio");
  c_agg->add_option("--eps", agg.eps, "partition feasibility threshold");
  c_agg->add_option("--restarts", agg.restarts, "CP restarts");
  c_agg->add_option("--val-frac", agg.val_frac, "validation fraction");
  c_agg->add_option("--seed", seed, "random seed");

  CLI::App* c_synth = app.add_subcommand("synth", "generate synthetic data");
  c_synth->add_option("--regime", synth_regime,
                      "second-order | third-order | graph | gaussian");
  c_synth->add_option("--seed", seed, "random seed");
  c_synth->add_option("--n", synth_n, "sample count (0 = regime default)");
  c_synth->add_option("--level", synth_level, "confounder strength in [0,1]");
  c_synth->add_option("--out", synth_out, "output directory");

  CLI::App* c_bench = app.add_subcommand("bench", "run benchmark experiments");
  c_bench->add_option("--experiment", bench_exp,
                      "partition | second-order | third-order");
  c_bench->add_option("--seeds", bench_seeds, "seed count (0 = default)");
  c_bench->add_option("--seed", seed, "base seed");
  c_bench->add_option("--out", bench_out, "output directory");

  CLI::App* c_theory = app.add_subcommand("check-theory", "empirical theory checks");
  c_theory->add_option("--seeds", theory_seeds, "seeds for rate checks");
  c_theory->add_option("--seed", seed, "base seed");
  c_theory->add_option("--out", theory_out, "output directory");

  try {
    bool seed_given = false;
    try {
      app.parse(argc, argv);
      seed_given = c_agg->count("--seed") || c_synth->count("--seed") ||
                   c_bench->count("--seed") || c_theory->count("--seed");
    } catch (const CLI::ParseError& e) {
      const int rc = app.exit(e);
      return rc == 0 ? kExitOk : kExitInput;
    }
    if (!seed_given) seed = default_seed();
    agg.seed = seed;

    if (c_agg->parsed()) return run_aggregate(agg);
    if (c_synth->parsed())
      return run_synth(synth_regime, seed, synth_n, synth_level, synth_out);
    if (c_bench->parsed()) return run_bench(bench_exp, bench_seeds, seed, bench_out);
    if (c_theory->parsed()) return run_check_theory(theory_seeds, seed, theory_out);
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
