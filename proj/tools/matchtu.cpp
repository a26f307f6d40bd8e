// matchtu — transferable-utility stable matching toolkit.
//
// Subcommands: generate (synthetic markets), factorize (implicit ALS),
// solve (batch / mini-batch IPFP), evaluate (policy comparison), bench
// (scaling benchmarks), ingest (ratings CSV densification).
//
// Exit codes: 0 success, 1 runtime failure, 2 refused run (size cap or
// predicted out-of-memory), 3 invalid configuration.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "matchtu/matchtu.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> items;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      if (!cur.empty()) items.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) items.push_back(cur);
  return items;
}

std::vector<std::size_t> parse_size_list(const std::string& csv,
                                         const char* what) {
  std::vector<std::size_t> values;
  for (const auto& item : split_list(csv)) {
    try {
      values.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string(what) + ": bad entry '" + item +
                                  "'");
    }
  }
  if (values.empty()) {
    throw std::invalid_argument(std::string(what) + ": empty list");
  }
  return values;
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error(path.string() + ": cannot open for writing");
  }
  out << j.dump(2) << "\n";
}

int run_generate(std::size_t candidates, std::size_t employers, double lambda,
                 std::uint64_t seed, double total_mass,
                 const std::string& out_dir) {
  const fs::path dir(out_dir);
  fs::create_directories(dir);

  matchtu::CrowdingConfig cfg{lambda, seed, {candidates, employers, 0}};
  const matchtu::DensePrefs prefs = matchtu::generate_preferences(cfg);
  const matchtu::MassSpec mass =
      matchtu::uniform_mass(cfg.shape, total_mass);

  matchtu::write_mtu_matrix(dir / "P.mtu", prefs.P);
  matchtu::write_mtu_matrix(dir / "Q.mtu", prefs.Q);
  matchtu::write_mass_json(dir / "mass.json", mass);

  json manifest;
  manifest["kind"] = "synthetic-market";
  manifest["candidates"] = candidates;
  manifest["employers"] = employers;
  manifest["lambda"] = lambda;
  manifest["seed"] = seed;
  manifest["total_mass"] = total_mass;
  manifest["generator"] = matchtu::kGeneratorName;
  manifest["files"] = {{"P", "P.mtu"}, {"Q", "Q.mtu"}, {"mass", "mass.json"}};
  write_json_file(dir / "manifest.json", manifest);

  std::cout << "wrote " << (dir / "manifest.json").string() << "\n";
  return 0;
}

matchtu::Matrix load_observations(const fs::path& path, bool binarize) {
  matchtu::Matrix obs = matchtu::read_matrix_any(path);
  if (binarize) {
    for (std::size_t i = 0; i < obs.size(); ++i) {
      double& v = obs.data()[i];
      v = (std::isfinite(v) && v > 0.0) ? 1.0 : 0.0;
    }
  }
  return obs;
}

int run_factorize(const std::string& obs_p, const std::string& obs_q,
                  matchtu::FactorizeConfig cfg, bool binarize,
                  const std::string& out_dir) {
  const fs::path dir(out_dir);
  fs::create_directories(dir);

  json manifest;
  manifest["kind"] = "implicit-als-factors";
  manifest["dim"] = cfg.dim;
  manifest["reg"] = cfg.reg;
  manifest["alpha"] = cfg.alpha;
  manifest["iters"] = cfg.iters;
  manifest["seed"] = cfg.seed;
  manifest["generator"] = matchtu::kGeneratorName;

  {
    const matchtu::Matrix obs = load_observations(obs_p, binarize);
    const matchtu::FactorizeResult fit = matchtu::factorize_implicit(obs, cfg);
    matchtu::write_mtu_matrix(dir / "F.mtu", fit.row_factors);
    matchtu::write_mtu_matrix(dir / "G.mtu", fit.col_factors);
    manifest["candidate_side"] = {{"objective", fit.objective},
                                  {"warnings", fit.warnings},
                                  {"files", {"F.mtu", "G.mtu"}}};
    if (fit.warnings > 0) {
      std::cerr << "warning: " << fit.warnings
                << " singular normal equations patched on the candidate side\n";
    }
  }
  if (!obs_q.empty()) {
    matchtu::FactorizeConfig qcfg = cfg;
    qcfg.seed = matchtu::derive_seed(cfg.seed, 1);
    const matchtu::Matrix obs = load_observations(obs_q, binarize);
    const matchtu::FactorizeResult fit =
        matchtu::factorize_implicit(obs, qcfg);
    matchtu::write_mtu_matrix(dir / "K.mtu", fit.row_factors);
    matchtu::write_mtu_matrix(dir / "L.mtu", fit.col_factors);
    manifest["employer_side"] = {{"objective", fit.objective},
                                 {"warnings", fit.warnings},
                                 {"files", {"K.mtu", "L.mtu"}}};
    if (fit.warnings > 0) {
      std::cerr << "warning: " << fit.warnings
                << " singular normal equations patched on the employer side\n";
    }
  }
  write_json_file(dir / "manifest.json", manifest);
  std::cout << "wrote " << (dir / "manifest.json").string() << "\n";
  return 0;
}

struct SolveArgs {
  std::string mode = "batch";
  std::string p_path, q_path;
  std::string f_path, k_path, g_path, l_path;
  std::string mass_path;
  double uniform_total = 0.0;  // > 0 selects uniform mass
  double beta = 1.0;
  int iters = 100;
  double tol = 0.0;
  std::size_t batch_size = 100;
  std::string out_dir = ".";
};

int run_solve(const SolveArgs& args) {
  const fs::path dir(args.out_dir);
  fs::create_directories(dir);

  std::optional<matchtu::PreferenceModel> model;
  if (!args.p_path.empty() || !args.q_path.empty()) {
    if (args.p_path.empty() || args.q_path.empty()) {
      throw std::invalid_argument("solve: dense input needs both --p and --q");
    }
    model = matchtu::DensePrefs{matchtu::read_matrix_any(args.p_path),
                                matchtu::read_matrix_any(args.q_path)};
  } else if (!args.f_path.empty()) {
    if (args.k_path.empty() || args.g_path.empty() || args.l_path.empty()) {
      throw std::invalid_argument(
          "solve: factorized input needs --f, --k, --g and --l");
    }
    model = matchtu::FactorizedPrefs{matchtu::read_matrix_any(args.f_path),
                                     matchtu::read_matrix_any(args.k_path),
                                     matchtu::read_matrix_any(args.g_path),
                                     matchtu::read_matrix_any(args.l_path)};
  } else {
    throw std::invalid_argument(
        "solve: provide either --p/--q or --f/--k/--g/--l");
  }

  const matchtu::MarketShape shape = matchtu::shape_of(*model);
  matchtu::MassSpec mass;
  if (!args.mass_path.empty()) {
    mass = matchtu::read_mass_json(args.mass_path);
  } else if (args.uniform_total > 0.0) {
    mass = matchtu::uniform_mass(shape, args.uniform_total);
  } else {
    throw std::invalid_argument(
        "solve: provide --mass mass.json or --uniform-mass C");
  }

  const matchtu::ValidationReport report =
      matchtu::validate_market(shape, *model, mass);
  if (!report.ok()) {
    std::cerr << "market validation failed:\n";
    for (const auto& v : report.violations) std::cerr << "  - " << v << "\n";
    return 3;
  }

  matchtu::SolverConfig cfg{args.beta, args.iters, args.tol, args.batch_size};
  json summary;
  summary["beta"] = args.beta;
  summary["iters"] = args.iters;
  summary["residual_tol"] = args.tol;

  if (args.mode == "batch") {
    const auto result = matchtu::solve_batch(*model, mass, cfg);
    matchtu::write_dense_matching(dir / "mu.mtu", dir / "unmatched.json",
                                  result.matching);
    matchtu::write_scaling_state(dir / "scaling.json", result.state);
    summary["mode"] = "batch";
    summary["converged"] = result.diagnostics.converged;
    summary["final_residual"] = result.state.final_residual;
    summary["constraint_residual"] =
        matchtu::constraint_residual(result.matching, mass);
    summary["files"] = {"mu.mtu", "unmatched.json", "scaling.json"};
  } else if (args.mode == "minibatch") {
    const auto result = matchtu::solve_minibatch(*model, mass, cfg);
    matchtu::write_factorized_matching(dir / "psi.mtu", dir / "xi.mtu",
                                       dir / "matching.json", result.matching);
    matchtu::write_scaling_state(dir / "scaling.json", result.state);
    summary["mode"] = "minibatch";
    summary["batch_size"] = args.batch_size;
    summary["converged"] = result.diagnostics.converged;
    summary["final_residual"] = result.state.final_residual;
    summary["files"] = {"psi.mtu", "xi.mtu", "matching.json", "scaling.json"};
  } else {
    throw std::invalid_argument("solve: mode must be batch or minibatch");
  }
  write_json_file(dir / "solve.json", summary);
  std::cout << "wrote " << (dir / "solve.json").string() << "\n";
  return 0;
}

struct EvaluateArgs {
  std::string policies = "naive,reciprocal,cross-ratio,tu-batch,tu-minibatch";
  double lambda = 0.0;
  std::size_t candidates = 1000;
  std::size_t employers = 500;
  int reps = 10;
  double beta = 1.0;
  std::string exam = "exp";
  std::uint64_t seed = 0;
  int solver_iters = 100;
  std::size_t batch_size = 128;
  std::size_t dim = 16;
  double alpha = 0.0;
  double reg = 0.05;
  int ials_iters = 12;
  std::string out = "report.json";
};

int run_evaluate(const EvaluateArgs& args) {
  matchtu::ComparisonConfig cfg;
  cfg.shape = {args.candidates, args.employers, 0};
  cfg.lambda = args.lambda;
  cfg.beta = args.beta;
  cfg.solver_iters = args.solver_iters;
  cfg.minibatch_size = args.batch_size;
  cfg.repetitions = args.reps;
  cfg.seed = args.seed;
  cfg.factorization = {args.dim, args.reg, args.alpha, args.ials_iters, 0};
  cfg.policies.clear();
  for (const auto& name : split_list(args.policies)) {
    const auto kind = matchtu::parse_policy(name);
    if (!kind) {
      throw std::invalid_argument("evaluate: unknown policy '" + name + "'");
    }
    cfg.policies.push_back(*kind);
  }
  const auto exam = matchtu::parse_exam(args.exam);
  if (!exam) {
    throw std::invalid_argument("evaluate: unknown exam function '" +
                                args.exam + "'");
  }
  cfg.exam = *exam;

  const matchtu::WelfareReport report = matchtu::run_comparison(cfg);

  json j;
  j["schema_version"] = 1;
  j["config"] = {{"candidates", args.candidates},
                 {"employers", args.employers},
                 {"lambda", args.lambda},
                 {"beta", args.beta},
                 {"reps", args.reps},
                 {"seed", args.seed},
                 {"exam", args.exam},
                 {"solver_iters", args.solver_iters},
                 {"minibatch_size", args.batch_size},
                 {"factorization",
                  {{"dim", args.dim},
                   {"alpha", args.alpha},
                   {"reg", args.reg},
                   {"iters", args.ials_iters}}}};
  j["generator"] = matchtu::kGeneratorName;
  j["welfare_formula"] = report.formula;
  j["repetitions"] = report.repetitions;
  j["policies"] = json::object();
  for (const auto& stats : report.per_policy) {
    json pj;
    pj["mean"] = stats.mean;
    if (stats.std_error) {
      pj["std_error"] = *stats.std_error;
    } else {
      pj["std_error"] = nullptr;
    }
    pj["values"] = stats.values;
    j["policies"][matchtu::to_string(stats.policy)] = pj;
  }
  write_json_file(args.out, j);

  for (const auto& stats : report.per_policy) {
    std::cout << matchtu::to_string(stats.policy) << ": mean "
              << stats.mean;
    if (stats.std_error) std::cout << " +- " << *stats.std_error;
    std::cout << "\n";
  }
  std::cout << "wrote " << args.out << "\n";
  return 0;
}

struct BenchArgs {
  std::string mode = "minibatch";
  std::string sizes;
  std::string batch_sizes = "100";
  std::string dims = "50";
  double beta = 1.0;
  int iters = 100;
  int warmup = 3;
  std::uint64_t seed = 42;
  double budget_gib = 8.0;
  bool allow_large = false;
  std::string out = "bench.json";
  std::string format = "json";
};

int run_bench(const BenchArgs& args) {
  matchtu::BenchConfig cfg;
  const auto mode = matchtu::parse_bench_mode(args.mode);
  if (!mode) {
    throw std::invalid_argument("bench: mode must be batch or minibatch");
  }
  cfg.mode = *mode;
  cfg.sizes = parse_size_list(args.sizes, "bench --sizes");
  cfg.batch_sizes = parse_size_list(args.batch_sizes, "bench --batch-size");
  cfg.factor_dims = parse_size_list(args.dims, "bench --dim");
  cfg.beta = args.beta;
  cfg.iters = args.iters;
  cfg.warmup_iters = args.warmup;
  cfg.seed = args.seed;
  cfg.allow_large = args.allow_large;
  if (!(args.budget_gib > 0.0)) {
    throw std::invalid_argument("bench: budget must be positive");
  }
  cfg.memory_budget_bytes = static_cast<std::size_t>(
      args.budget_gib * static_cast<double>(std::size_t{1} << 30));

  const auto format = matchtu::parse_report_format(args.format);
  if (!format) {
    throw std::invalid_argument("bench: format must be json or csv");
  }

  const auto records = matchtu::bench_sweep(cfg, &std::cerr);
  matchtu::emit_report(records, *format, args.out);
  for (const auto& r : records) {
    std::cout << r.mode << " size=" << r.size;
    if (r.batch_size > 0) std::cout << " B=" << r.batch_size;
    std::cout << " D=" << r.dim << ": " << r.mean_time_per_iter_s
              << " s/iter, peak " << r.peak_solver_bytes << " bytes\n";
  }
  std::cout << "wrote " << args.out << "\n";
  return 0;
}

int run_ingest(const std::string& ratings_path, const std::string& out_dir,
               std::size_t raters_hint, std::size_t rated_hint) {
  const fs::path dir(out_dir);
  fs::create_directories(dir);

  std::optional<std::pair<std::size_t, std::size_t>> hint;
  if (raters_hint > 0 || rated_hint > 0) {
    hint = std::make_pair(raters_hint, rated_hint);
  }
  const matchtu::RatingsTable table =
      matchtu::ingest_ratings(ratings_path, hint);
  if (table.duplicate_count > 0) {
    std::cerr << "warning: " << table.duplicate_count
              << " duplicate (rater, rated) pairs; last value kept\n";
  }

  matchtu::write_mtu_matrix(dir / "ratings.mtu", table.ratings);
  json ids;
  ids["rater_ids"] = table.rater_ids;
  ids["rated_ids"] = table.rated_ids;
  ids["duplicates"] = table.duplicate_count;
  write_json_file(dir / "ids.json", ids);
  std::cout << "wrote " << (dir / "ratings.mtu").string() << " ("
            << table.ratings.rows() << "x" << table.ratings.cols() << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"transferable-utility stable matching toolkit"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic market");
  std::size_t gen_candidates = 1000, gen_employers = 500;
  double gen_lambda = 0.0, gen_total = 1.0;
  std::uint64_t gen_seed = 0;
  std::string gen_out = ".";
  gen->add_option("--candidates", gen_candidates, "number of candidates |X|");
  gen->add_option("--employers", gen_employers, "number of employers |Y|");
  gen->add_option("--lambda", gen_lambda, "crowding parameter in [0,1]");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--total-mass", gen_total, "total capacity C");
  gen->add_option("--out", gen_out, "output directory");

  // factorize
  auto* fact = app.add_subcommand("factorize",
                                  "implicit-ALS factors from observations");
  std::string fact_obs_p, fact_obs_q, fact_out = ".";
  matchtu::FactorizeConfig fact_cfg;
  bool fact_binarize = false;
  fact->add_option("--obs-p", fact_obs_p,
                   "candidate-side observation matrix (MTU1 or CSV)")
      ->required();
  fact->add_option("--obs-q", fact_obs_q,
                   "employer-side observation matrix (optional)");
  fact->add_option("--dim", fact_cfg.dim, "factor dimension D");
  fact->add_option("--reg", fact_cfg.reg, "ridge weight");
  fact->add_option("--alpha", fact_cfg.alpha, "confidence weight");
  fact->add_option("--iters", fact_cfg.iters, "alternations");
  fact->add_option("--seed", fact_cfg.seed, "init seed");
  fact->add_flag("--binarize", fact_binarize,
                 "threshold entries > 0 to 1 (missing/NaN to 0)");
  fact->add_option("--out", fact_out, "output directory");

  // solve
  auto* solve = app.add_subcommand("solve", "run IPFP on a market");
  SolveArgs solve_args;
  solve->add_option("--mode", solve_args.mode, "batch or minibatch");
  solve->add_option("--p", solve_args.p_path, "dense candidate scores");
  solve->add_option("--q", solve_args.q_path, "dense employer scores");
  solve->add_option("--f", solve_args.f_path, "candidate factors F");
  solve->add_option("--k", solve_args.k_path, "candidate factors K");
  solve->add_option("--g", solve_args.g_path, "employer factors G");
  solve->add_option("--l", solve_args.l_path, "employer factors L");
  solve->add_option("--mass", solve_args.mass_path, "mass.json");
  solve->add_option("--uniform-mass", solve_args.uniform_total,
                    "uniform mass with total C");
  solve->add_option("--beta", solve_args.beta, "entropy scale");
  solve->add_option("--iters", solve_args.iters, "iteration budget");
  solve->add_option("--tol", solve_args.tol, "early-stop tolerance (0 = off)");
  solve->add_option("--batch-size", solve_args.batch_size,
                    "mini-batch rows per update");
  solve->add_option("--out", solve_args.out_dir, "output directory");

  // evaluate
  auto* eval = app.add_subcommand("evaluate",
                                  "expected-match policy comparison");
  EvaluateArgs eval_args;
  eval->add_option("--policies", eval_args.policies, "comma-separated list");
  eval->add_option("--lambda", eval_args.lambda, "crowding parameter");
  eval->add_option("--candidates", eval_args.candidates, "|X|");
  eval->add_option("--employers", eval_args.employers, "|Y|");
  eval->add_option("--reps", eval_args.reps, "repetitions");
  eval->add_option("--beta", eval_args.beta, "entropy scale");
  eval->add_option("--exam", eval_args.exam, "examination function (exp)");
  eval->add_option("--seed", eval_args.seed, "seed");
  eval->add_option("--solver-iters", eval_args.solver_iters,
                   "IPFP iterations");
  eval->add_option("--batch-size", eval_args.batch_size,
                   "mini-batch rows per update");
  eval->add_option("--dim", eval_args.dim, "iALS factor dimension");
  eval->add_option("--alpha", eval_args.alpha, "iALS confidence weight");
  eval->add_option("--reg", eval_args.reg, "iALS ridge weight");
  eval->add_option("--ials-iters", eval_args.ials_iters, "iALS alternations");
  eval->add_option("--out", eval_args.out, "report path");

  // bench
  auto* bench = app.add_subcommand("bench", "scaling benchmarks");
  BenchArgs bench_args;
  bench->add_option("--mode", bench_args.mode, "batch or minibatch");
  bench->add_option("--sizes", bench_args.sizes, "comma-separated |X|=|Y|")
      ->required();
  bench->add_option("--batch-size", bench_args.batch_sizes,
                    "comma-separated mini-batch sizes");
  bench->add_option("--dim", bench_args.dims,
                    "comma-separated factor dimensions");
  bench->add_option("--beta", bench_args.beta, "entropy scale");
  bench->add_option("--iters", bench_args.iters, "measured iterations");
  bench->add_option("--warmup", bench_args.warmup, "untimed warm-up iterations");
  bench->add_option("--seed", bench_args.seed, "seed");
  bench->add_option("--budget-gib", bench_args.budget_gib,
                    "memory budget in GiB");
  bench->add_flag("--allow-large", bench_args.allow_large,
                  "run sizes above the default caps");
  bench->add_option("--out", bench_args.out, "report path");
  bench->add_option("--format", bench_args.format, "json or csv");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "densify a ratings CSV");
  std::string ingest_ratings_path, ingest_out = ".";
  std::size_t ingest_raters = 0, ingest_rated = 0;
  ingest->add_option("--ratings", ingest_ratings_path,
                     "CSV of rater_id,rated_id,rating")
      ->required();
  ingest->add_option("--raters", ingest_raters, "expected rater count");
  ingest->add_option("--rated", ingest_rated, "expected rated count");
  ingest->add_option("--out", ingest_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return 3;
  }

  try {
    if (gen->parsed()) {
      return run_generate(gen_candidates, gen_employers, gen_lambda, gen_seed,
                          gen_total, gen_out);
    }
    if (fact->parsed()) {
      return run_factorize(fact_obs_p, fact_obs_q, fact_cfg, fact_binarize,
                           fact_out);
    }
    if (solve->parsed()) return run_solve(solve_args);
    if (eval->parsed()) return run_evaluate(eval_args);
    if (bench->parsed()) return run_bench(bench_args);
    if (ingest->parsed()) {
      return run_ingest(ingest_ratings_path, ingest_out, ingest_raters,
                        ingest_rated);
    }
  } catch (const matchtu::BenchRefused& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
