// Times the per-agent kernels in serial reference mode against the
// OpenMP-parallel mode and verifies that both produce identical iterates.

#include <chrono>
#include <cstdio>
#include <cstring>

#include "gne/cournot.hpp"
#include "gne/solvers.hpp"

using namespace gne;

namespace {

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct BenchResult {
  double serial_s = 0, parallel_s = 0;
  bool identical = false;
};

BenchResult bench_solver(const GameInstance& game, const CommGraph& graph,
                         const ConstantsBundle& constants, SolverKind kind, long iters) {
  BenchResult res;
  Iterate finals[2];
  for (int pass = 0; pass < 2; ++pass) {
    SolveOptions o;
    o.kind = kind;
    o.stop.fp_tol = 0;
    o.stop.kkt_tol = 0;
    o.stop.max_iters = iters;
    o.constants = constants;
    o.record_kkt = false;
    o.mode = pass == 0 ? ExecMode::Serial : ExecMode::Parallel;
    double t0 = now_s();
    SolveResult r = solve(game, graph, o);
    double dt = now_s() - t0;
    (pass == 0 ? res.serial_s : res.parallel_s) = dt;
    finals[pass] = r.u;
  }
  res.identical = (finals[0].x.array() == finals[1].x.array()).all() &&
                  (finals[0].z.array() == finals[1].z.array()).all() &&
                  (finals[0].lam.array() == finals[1].lam.array()).all();
  return res;
}

}  // namespace

int main(int argc, char** argv) {
  int firms = 300, markets = 30;
  long iters = 100;
  for (int i = 1; i + 1 < argc; i += 2) {
    if (!std::strcmp(argv[i], "--firms")) firms = std::atoi(argv[i + 1]);
    if (!std::strcmp(argv[i], "--markets")) markets = std::atoi(argv[i + 1]);
    if (!std::strcmp(argv[i], "--iters")) iters = std::atol(argv[i + 1]);
  }

  CournotParams params;
  params.n_firms = firms;
  params.n_markets = markets;
  params.participation_prob = 0.3;
  params.seed = 7;
  std::printf("generating cournot instance: %d firms, %d markets...\n", firms, markets);
  CournotInstance inst = generate(params);
  std::printf("n=%d, m*N=%d\n", inst.game.n, inst.game.m * inst.game.num_agents());

  ConstantsBundle c = compute_constants(inst.game, inst.graph);

  // kernel microbenchmark: pseudo-gradient fan-out
  {
    Vec x = default_initial_iterate(inst.game).x;
    const int reps = 200;
    Vec g_serial, g_parallel;
    double t0 = now_s();
    for (int r = 0; r < reps; ++r) g_serial = pseudo_gradient(inst.game, x, ExecMode::Serial);
    double ts = now_s() - t0;
    t0 = now_s();
    for (int r = 0; r < reps; ++r)
      g_parallel = pseudo_gradient(inst.game, x, ExecMode::Parallel);
    double tp = now_s() - t0;
    bool same = (g_serial.array() == g_parallel.array()).all();
    std::printf("pseudo_gradient x%d: serial %.3fs, openmp %.3fs, speedup %.2fx, %s\n",
                reps, ts, tp, ts / tp, same ? "bitwise identical" : "MISMATCH");
  }

  std::printf("\n%-6s %12s %12s %9s  %s\n", "solver", "serial[s]", "openmp[s]", "speedup",
              "outputs");
  for (SolverKind kind : {SolverKind::FB, SolverKind::FBF, SolverKind::FBHF}) {
    BenchResult r = bench_solver(inst.game, inst.graph, c, kind, iters);
    std::printf("%-6s %12.3f %12.3f %8.2fx  %s\n", solver_kind_name(kind), r.serial_s,
                r.parallel_s, r.serial_s / r.parallel_s,
                r.identical ? "bitwise identical" : "MISMATCH");
    if (!r.identical) return 1;
  }
  return 0;
}
