// Batch front-end: generate benchmark instances, run and compare the three
// equilibrium-seeking algorithms, check standing assumptions.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gne/cournot.hpp"
#include "gne/distsim.hpp"
#include "gne/instance_io.hpp"
#include "gne/solvers.hpp"
#include "gne/trace_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gne;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitPrerequisite = 2;
constexpr int kExitDivergence = 3;

struct ExperimentConfig {
  std::optional<std::string> instance_path;
  std::optional<CournotParams> cournot;
  std::vector<SolverKind> solvers = {SolverKind::FB, SolverKind::FBF, SolverKind::FBHF};
  StopRule stop;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "runs";
  std::string reference = "compute";  // compute | load | none
  bool distributed = false;
  ExecMode mode = ExecMode::Serial;
};

CournotParams cournot_params_from_config(const json& j) {
  CournotParams p;
  p.n_firms = j.value("n_firms", p.n_firms);
  p.n_markets = j.value("n_markets", p.n_markets);
  auto range = [&](const char* key, double& lo, double& hi) {
    if (j.contains(key)) {
      lo = j[key][0].get<double>();
      hi = j[key][1].get<double>();
    }
  };
  range("delta", p.delta_lo, p.delta_hi);
  range("market_cap", p.market_cap_lo, p.market_cap_hi);
  range("pi", p.pi_lo, p.pi_hi);
  range("r", p.r_lo, p.r_hi);
  range("pbar", p.pbar_lo, p.pbar_hi);
  range("d", p.d_lo, p.d_hi);
  p.participation_prob = j.value("participation_prob", p.participation_prob);
  p.seed = j.value("seed", p.seed);
  p.midpoint_mode = j.value("midpoint_mode", p.midpoint_mode);
  return p;
}

void apply_config_file(const std::string& path, ExperimentConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config '" + path + "' is not valid JSON: " + e.what());
  }
  if (j.contains("instance")) cfg.instance_path = j["instance"].get<std::string>();
  if (j.contains("cournot")) cfg.cournot = cournot_params_from_config(j["cournot"]);
  if (j.contains("solvers")) {
    cfg.solvers.clear();
    for (const auto& s : j["solvers"]) {
      auto kind = parse_solver_kind(s.get<std::string>());
      if (!kind) throw ValidationError("config: unknown solver '" + s.get<std::string>() + "'");
      cfg.solvers.push_back(*kind);
    }
  }
  if (j.contains("stop")) {
    cfg.stop.fp_tol = j["stop"].value("fp_tol", cfg.stop.fp_tol);
    cfg.stop.kkt_tol = j["stop"].value("kkt_tol", cfg.stop.kkt_tol);
    cfg.stop.max_iters = j["stop"].value("max_iters", cfg.stop.max_iters);
  }
  if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
  if (j.contains("reference")) cfg.reference = j["reference"].get<std::string>();
  if (j.contains("distributed")) cfg.distributed = j["distributed"].get<bool>();
}

std::string reference_path(const std::string& out_dir, const std::string& digest) {
  return (fs::path(out_dir) / ("reference_" + digest + ".json")).string();
}

Vec compute_reference(const GameInstance& game, const CommGraph& graph, ExecMode mode) {
  SolveOptions o;
  o.kind = SolverKind::FBF;
  o.stop.fp_tol = 1e-10;
  o.stop.kkt_tol = 0;
  o.stop.max_iters = 500000;
  o.mode = mode;
  return solve(game, graph, o).u.x;
}

void save_reference(const std::string& path, const std::string& digest, const Vec& x) {
  json doc = {{"format", "gne-reference"}, {"digest", digest}, {"solver", "fbf"},
              {"fp_tol", 1e-10}};
  std::vector<double> xs(x.data(), x.data() + x.size());
  doc["x"] = xs;
  std::ofstream out(path, std::ios::binary);
  out << doc.dump(2) << "\n";
}

std::optional<Vec> load_reference(const std::string& path, const std::string& digest) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  json doc;
  try {
    in >> doc;
  } catch (const json::exception&) {
    return std::nullopt;
  }
  if (doc.value("digest", "") != digest) return std::nullopt;
  auto xs = doc.at("x").get<std::vector<double>>();
  Vec x(static_cast<Eigen::Index>(xs.size()));
  for (size_t i = 0; i < xs.size(); ++i) x[static_cast<Eigen::Index>(i)] = xs[i];
  return x;
}

json steps_to_json(const StepConfig& s) {
  auto vec = [](const Vec& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  return {{"rho", vec(s.rho)}, {"sigma", vec(s.sigma)}, {"tau", vec(s.tau)},
          {"psi_inv_norm", s.psi_inv_norm}};
}

struct RunOutcome {
  int exit_code = kExitOk;
};

void run_one(const ExperimentConfig& cfg, const GameInstance& game, const CommGraph& graph,
             const std::string& digest, const std::optional<Vec>& reference,
             SolverKind kind, std::optional<std::uint64_t> seed, RunOutcome& outcome) {
  const std::string tag = std::string(solver_kind_name(kind)) +
                          (seed ? "_seed" + std::to_string(*seed) : "");
  json summary = {{"solver", solver_kind_name(kind)},
                  {"instance_digest", digest},
                  {"fp_tol", cfg.stop.fp_tol},
                  {"kkt_tol", cfg.stop.kkt_tol},
                  {"max_iters", cfg.stop.max_iters},
                  {"reference", cfg.reference},
                  {"distributed", cfg.distributed}};
  if (seed) summary["seed"] = *seed;

  try {
    RunTrace trace;
    SolveStatus status = SolveStatus::MaxIters;
    StepConfig steps;
    double cpu_s = 0;

    std::optional<Vec> ref;
    if (reference) ref = *reference;
    if (cfg.distributed) {
      DistOptions d;
      d.kind = kind;
      d.stop = cfg.stop;
      d.mode = cfg.mode;
      d.reference_x = ref;
      DistResult r = run_distributed(game, graph, d);
      trace = std::move(r.trace);
      status = r.status;
      steps = r.steps;
      cpu_s = trace.rows.empty() ? 0 : trace.rows.back().cpu_s;
      write_message_csv((fs::path(cfg.out_dir) / ("messages_" + tag + ".csv")).string(),
                        r.stats);
    } else {
      SolveOptions o;
      o.kind = kind;
      o.stop = cfg.stop;
      o.mode = cfg.mode;
      o.reference_x = ref;
      SolveResult r = solve(game, graph, o);
      trace = std::move(r.trace);
      status = r.status;
      steps = r.steps;
      cpu_s = r.cpu_s;
      summary["wall_s"] = r.wall_s;
    }

    write_trace_csv((fs::path(cfg.out_dir) / ("trace_" + tag + ".csv")).string(), trace);
    const TraceRow& last = trace.rows.back();
    summary["status"] = solve_status_name(status);
    summary["iterations"] = last.iter + 1;
    summary["cpu_s"] = cpu_s;
    summary["fp_res"] = last.fp_res;
    summary["kkt"] = {{"stationarity", last.kkt_stat},
                      {"primal_feasibility", last.kkt_feas},
                      {"complementarity", last.kkt_comp},
                      {"dual_consensus", last.kkt_cons}};
    if (!std::isnan(last.rel_dist)) summary["rel_dist"] = last.rel_dist;
    summary["grad_evals"] = last.grad_evals;
    summary["comm_rounds"] = last.comm_rounds;
    summary["steps"] = steps_to_json(steps);
    std::string rel = std::isnan(last.rel_dist)
                          ? std::string()
                          : " rel_dist=" + format_double(last.rel_dist);
    std::printf("%-12s status=%-13s iters=%-7ld fp=%.3e kkt_max=%.3e cpu=%.3fs%s\n",
                tag.c_str(), solve_status_name(status), last.iter + 1, last.fp_res,
                std::max(std::max(last.kkt_stat, last.kkt_feas),
                         std::max(last.kkt_comp, last.kkt_cons)),
                cpu_s, rel.c_str());
  } catch (const PrerequisiteError& e) {
    summary["error"] = {{"type", "prerequisite"}, {"message", e.what()}};
    std::printf("%-12s prerequisite failure: %s\n", tag.c_str(), e.what());
    outcome.exit_code = std::max(outcome.exit_code, kExitPrerequisite);
  } catch (const DivergenceError& e) {
    summary["error"] = {{"type", "divergence"}, {"message", e.what()},
                        {"iteration", e.iteration}};
    std::printf("%-12s divergence at iteration %ld: %s\n", tag.c_str(), e.iteration,
                e.what());
    outcome.exit_code = std::max(outcome.exit_code, kExitDivergence);
  }

  std::ofstream out((fs::path(cfg.out_dir) / ("summary_" + tag + ".json")).string(),
                    std::ios::binary);
  out << summary.dump(2) << "\n";
}

int cmd_solve(const ExperimentConfig& cfg) {
  if (!cfg.instance_path && !cfg.cournot)
    throw ValidationError("solve: provide --instance, --cournot, or a config file");
  if (cfg.solvers.empty()) throw ValidationError("solve: at least one solver required");
  if (cfg.reference != "compute" && cfg.reference != "load" && cfg.reference != "none")
    throw ValidationError("solve: reference policy must be compute, load or none");
  cfg.stop.validate();
  fs::create_directories(cfg.out_dir);

  // (instance file, optional seed) pairs to run
  std::vector<std::pair<std::string, std::optional<std::uint64_t>>> sources;
  if (cfg.instance_path) {
    sources.push_back({*cfg.instance_path, std::nullopt});
  } else {
    std::vector<std::uint64_t> seeds = cfg.seeds;
    if (seeds.empty()) {
      seeds.resize(10);  // default repetition study
      for (int i = 0; i < 10; ++i) seeds[i] = static_cast<std::uint64_t>(i + 1);
    }
    for (std::uint64_t s : seeds) {
      CournotParams p = *cfg.cournot;
      p.seed = s;
      CournotInstance inst = generate(p);
      std::string path =
          (fs::path(cfg.out_dir) / ("instance_seed" + std::to_string(s) + ".json"))
              .string();
      save_instance(path, inst);
      sources.push_back({path, s});
    }
  }

  RunOutcome outcome;
  for (const auto& [path, seed] : sources) {
    InstanceDocument doc = load_instance(path);
    std::string digest = instance_digest(path);

    std::optional<Vec> reference;
    if (cfg.reference == "compute") {
      std::string rp = reference_path(cfg.out_dir, digest);
      reference = load_reference(rp, digest);
      if (!reference) {
        reference = compute_reference(doc.game, doc.graph, cfg.mode);
        save_reference(rp, digest, *reference);
      }
    } else if (cfg.reference == "load") {
      reference = load_reference(reference_path(cfg.out_dir, digest), digest);
      if (!reference)
        throw ValidationError("solve: no cached reference for instance " + digest);
    }

    for (SolverKind kind : cfg.solvers)
      run_one(cfg, doc.game, doc.graph, digest, reference, kind, seed, outcome);
  }
  return outcome.exit_code;
}

int cmd_compare(const std::string& out_dir) {
  std::vector<json> summaries;
  if (fs::exists(out_dir))
    for (const auto& entry : fs::directory_iterator(out_dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("summary_", 0) == 0 && entry.path().extension() == ".json") {
        std::ifstream in(entry.path());
        json j;
        in >> j;
        summaries.push_back(std::move(j));
      }
    }
  if (summaries.empty())
    throw ValidationError("compare: no run summaries in '" + out_dir + "'");
  std::sort(summaries.begin(), summaries.end(), [](const json& a, const json& b) {
    auto key = [](const json& j) {
      return std::make_pair(j.value("seed", std::uint64_t{0}),
                            j.value("solver", std::string{}));
    };
    return key(a) < key(b);
  });

  std::printf("%-6s %-6s %-13s %-9s %-12s %-12s %-10s\n", "solver", "seed", "status",
              "iters", "rel_dist", "kkt_max", "cpu_s");
  for (const json& j : summaries) {
    std::string seed_str = j.contains("seed")
                               ? std::to_string(j["seed"].get<std::uint64_t>())
                               : std::string("-");
    if (j.contains("error")) {
      std::printf("%-6s %-6s %s: %s\n", j.value("solver", "?").c_str(), seed_str.c_str(),
                  j["error"].value("type", "?").c_str(),
                  j["error"].value("message", "").c_str());
      continue;
    }
    double kkt_max = 0;
    if (j.contains("kkt"))
      for (const auto& [k, v] : j["kkt"].items()) kkt_max = std::max(kkt_max, v.get<double>());
    std::string rel = j.contains("rel_dist")
                          ? format_double(j["rel_dist"].get<double>())
                          : std::string("-");
    std::printf("%-6s %-6s %-13s %-9ld %-12s %-12.3e %-10.3f\n",
                j.value("solver", "?").c_str(), seed_str.c_str(),
                j.value("status", "?").c_str(), j.value("iterations", 0L), rel.c_str(),
                kkt_max, j.value("cpu_s", 0.0));
  }
  return kExitOk;
}

int cmd_check(const std::string& instance_path) {
  InstanceDocument doc;
  try {
    doc = load_instance(instance_path);
  } catch (const ValidationError& e) {
    // a disconnected communication graph is a finding, not a tool failure
    if (std::string(e.what()).find("disconnected") != std::string::npos) {
      std::printf("instance: %s\n", instance_path.c_str());
      std::printf("graph: connected=NO - %s\n", e.what());
      std::printf("graph connectivity assumption FAILED; further checks skipped\n");
      return kExitOk;
    }
    throw;
  }
  const GameInstance& game = doc.game;
  const CommGraph& graph = doc.graph;

  std::printf("instance: %s\n", instance_path.c_str());
  std::printf("agents N=%d, coupling rows m=%d, primal dim n=%d\n", game.num_agents(),
              game.m, game.n);
  std::printf("graph: connected=yes, max degree=%.6g, |L|=%.6g\n", graph.max_degree,
              graph.op_norm);

  ConstantsBundle c = compute_constants(game, graph);
  std::printf("constants: beta=%.6g%s eta=%.6g%s |A|=%.6g\n", c.beta,
              c.beta_empirical ? " (empirical)" : "", c.eta,
              c.eta_empirical ? " (empirical)" : "", c.a_norm);
  std::printf("  L_A=%.6g L_B=%.6g L_D=%.6g", c.lips_A, c.lips_B, c.lips_D);
  if (c.theta)
    std::printf(" theta=%.6g\n", *c.theta);
  else
    std::printf(" theta=undefined (eta=0)\n");

  OperatorCertificates cert = sample_operator_certificates(game, c.beta, c.eta);
  std::printf("sampled: monotone=%s (min inner %.3e), lipschitz=%s (max ratio %.6g), "
              "strong=%s (min modulus %.6g)\n",
              cert.monotone ? "yes" : "NO", cert.min_inner,
              cert.lipschitz_ok ? "yes" : "NO", cert.max_ratio,
              c.eta > 0 ? (cert.strongly_monotone_ok ? "yes" : "NO") : "n/a",
              cert.min_modulus);

  for (SolverKind kind : {SolverKind::FB, SolverKind::FBF, SolverKind::FBHF}) {
    try {
      StepConfig s;
      switch (kind) {
        case SolverKind::FB: {
          s = select_steps_fb(game, graph, c);
          PhiFb phi = build_phi_fb(s, game, graph);
          std::printf("fb:   admissible, max step %.6g, preconditioner min eig %.6g\n",
                      s.psi_inv_norm, phi.min_eig);
          break;
        }
        case SolverKind::FBF:
          s = select_steps_fbf(game, c);
          std::printf("fbf:  admissible, uniform step %.6g (|Psi^-1| L_D = %.6g)\n",
                      s.psi_inv_norm, s.psi_inv_norm * c.lips_D);
          break;
        case SolverKind::FBHF:
          s = select_steps_fbhf(game, c);
          std::printf("fbhf: admissible, uniform step %.6g (bound min{2 theta, 1/L_B})\n",
                      s.psi_inv_norm);
          break;
      }
    } catch (const PrerequisiteError& e) {
      std::printf("%s: inadmissible - %s\n", solver_kind_name(kind), e.what());
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed generalized Nash equilibrium solvers"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "generate a Cournot benchmark instance");
  CournotParams gen_params;
  std::string gen_out = "instance.json";
  gen->add_option("--seed", gen_params.seed, "generator seed");
  gen->add_option("--firms", gen_params.n_firms, "number of firms");
  gen->add_option("--markets", gen_params.n_markets, "number of markets");
  gen->add_option("--participation-prob", gen_params.participation_prob,
                  "market participation probability");
  gen->add_flag("--midpoint", gen_params.midpoint_mode,
                "use range midpoints instead of draws");
  gen->add_option("--out", gen_out, "output instance file")->required();

  auto* slv = app.add_subcommand("solve", "run solvers and write trace CSVs");
  ExperimentConfig cfg;
  std::string config_path;
  std::vector<std::string> solver_names;
  std::vector<std::uint64_t> seed_args;
  std::string instance_arg;
  bool parallel = false, distributed = false, use_cournot_defaults = false;
  slv->add_option("--config", config_path, "experiment config (JSON)");
  slv->add_option("--instance", instance_arg, "instance file to solve");
  slv->add_flag("--cournot", use_cournot_defaults,
                "generate default Cournot instances instead of loading a file");
  slv->add_option("--solver", solver_names, "solver (fb|fbf|fbhf), repeatable");
  slv->add_option("--seed", seed_args, "instance seed, repeatable");
  slv->add_option("--out", cfg.out_dir, "output directory");
  slv->add_option("--fp-tol", cfg.stop.fp_tol, "fixed-point residual tolerance");
  slv->add_option("--kkt-tol", cfg.stop.kkt_tol, "KKT residual tolerance");
  slv->add_option("--max-iters", cfg.stop.max_iters, "iteration cap");
  slv->add_option("--reference", cfg.reference, "reference policy: compute|load|none");
  slv->add_flag("--distributed", distributed,
                "run the message-passing simulation instead of the centralized engine");
  slv->add_flag("--parallel", parallel, "fan per-agent kernels over OpenMP threads");

  auto* cmp = app.add_subcommand("compare", "tabulate run summaries");
  std::string cmp_dir = "runs";
  cmp->add_option("--out", cmp_dir, "directory with run summaries");

  auto* chk = app.add_subcommand("check", "report standing assumptions of an instance");
  std::string chk_instance;
  chk->add_option("--instance", chk_instance, "instance file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      CournotInstance inst = generate(gen_params);
      save_instance(gen_out, inst);
      std::printf("wrote %s (N=%d, m=%d, n=%d)\n", gen_out.c_str(),
                  inst.game.num_agents(), inst.game.m, inst.game.n);
      return kExitOk;
    }
    if (slv->parsed()) {
      cfg.mode = default_exec_mode();  // honors GNE_PARALLEL=1
      if (!config_path.empty()) apply_config_file(config_path, cfg);
      if (!instance_arg.empty()) cfg.instance_path = instance_arg;
      if (use_cournot_defaults && !cfg.cournot) cfg.cournot = CournotParams{};
      if (!solver_names.empty()) {
        cfg.solvers.clear();
        for (const std::string& s : solver_names) {
          auto kind = parse_solver_kind(s);
          if (!kind) throw ValidationError("unknown solver '" + s + "'");
          cfg.solvers.push_back(*kind);
        }
      }
      if (!seed_args.empty()) cfg.seeds = seed_args;
      if (distributed) cfg.distributed = true;
      if (parallel) cfg.mode = ExecMode::Parallel;
      return cmd_solve(cfg);
    }
    if (cmp->parsed()) return cmd_compare(cmp_dir);
    if (chk->parsed()) return cmd_check(chk_instance);
  } catch (const PrerequisiteError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitPrerequisite;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDivergence;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  }
  return kExitOk;
}
