#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gne/errors.hpp"
#include "gne/splitting.hpp"

namespace gne {

enum class SolverKind { FB, FBF, FBHF };

const char* solver_kind_name(SolverKind k);
std::optional<SolverKind> parse_solver_kind(const std::string& name);

// Stopping rule. A tolerance <= 0 disables that criterion; max_iters is
// always enforced and must be positive.
struct StopRule {
  double fp_tol = 1e-8;   // on ||u_{k+1} - u_k|| / max(1, ||u_k||)
  double kkt_tol = 0.0;   // on the largest KKT residual field
  long max_iters = 100000;

  void validate() const;
};

enum class SolveStatus { ConvergedFp, ConvergedKkt, MaxIters };
const char* solve_status_name(SolveStatus s);

struct TraceRow {
  long iter = 0;
  double fp_res = 0;
  double kkt_stat = 0, kkt_feas = 0, kkt_comp = 0, kkt_cons = 0;
  double rel_dist = std::numeric_limits<double>::quiet_NaN();  // NaN = no reference
  double cpu_s = 0;        // cumulative process CPU, algorithm work only
  long comm_rounds = 0;    // cumulative, 2 per iteration
  long grad_evals = 0;     // cumulative pseudo-gradient evaluations
};

struct RunTrace {
  std::vector<TraceRow> rows;
};

// Thrown when an iterate stops being finite.
struct SolverDivergence : DivergenceError {
  SolverDivergence(const std::string& msg, long iter, Iterate last)
      : DivergenceError(msg, iter), last_finite(std::move(last)) {}
  Iterate last_finite;
};

// Step selection.
//
// FB uses a diagonal-dominance rule on the preconditioner rows plus, when
// needed, a uniform diagonal shift that raises the smallest eigenvalue
// until the cocoercivity step condition alpha*theta > 1/2 holds. Requires
// eta > 0.
StepConfig select_steps_fb(const GameInstance& game, const CommGraph& graph,
                           const ConstantsBundle& constants, double margin = 1e-2);
// FBF: uniform steps safety / L_D, so |Psi^{-1}| L_D < 1 strictly.
StepConfig select_steps_fbf(const GameInstance& game, const ConstantsBundle& constants,
                            double safety = 0.99);
// FBHF: uniform steps safety * min{2 theta, 1/L_B}. Requires eta > 0.
StepConfig select_steps_fbhf(const GameInstance& game, const ConstantsBundle& constants,
                             double safety = 0.99);

// Single iterations of the three fixed-point maps. The FBF and FBHF steps
// also return the half-iterate (tilde variables).
Iterate step_fb(const GameInstance& game, const CommGraph& graph, const Iterate& u,
                const StepConfig& steps, ExecMode mode = ExecMode::Serial);
std::pair<Iterate, Iterate> step_fbf(const GameInstance& game, const CommGraph& graph,
                                     const Iterate& v, const StepConfig& steps,
                                     ExecMode mode = ExecMode::Serial);
std::pair<Iterate, Iterate> step_fbhf(const GameInstance& game, const CommGraph& graph,
                                      const Iterate& v, const StepConfig& steps,
                                      ExecMode mode = ExecMode::Serial);

// x at the box midpoints when bounds are known (0 otherwise), z and lambda
// at 0.
Iterate default_initial_iterate(const GameInstance& game);

struct SolveOptions {
  SolverKind kind = SolverKind::FBF;
  StopRule stop;
  ExecMode mode = ExecMode::Serial;
  std::optional<Iterate> u0;
  std::optional<Vec> reference_x;            // enables the rel_dist column
  std::optional<ConstantsBundle> constants;  // precomputed, else derived here
  // Overrides the step selector and skips its admissibility checks. Meant
  // for experiments that deliberately run a scheme outside its hypotheses.
  std::optional<StepConfig> forced_steps;
  // Called with (0, u0) before the first iteration and (k+1, u_{k+1}) after
  // each one.
  std::function<void(long, const Iterate&)> observer;
  // Skip the per-iteration KKT bookkeeping (kkt_tol must then be inactive);
  // the trace's KKT columns stay empty. For timing studies.
  bool record_kkt = true;
};

struct SolveResult {
  Iterate u;
  RunTrace trace;
  SolveStatus status = SolveStatus::MaxIters;
  StepConfig steps;
  double cpu_s = 0;   // algorithm CPU time
  double wall_s = 0;  // whole solve, including bookkeeping
};

SolveResult solve(const GameInstance& game, const CommGraph& graph,
                  const SolveOptions& options);

namespace detail {

// One agent's linear-part blocks, reused by the FBHF half-forward step.
struct BBlocks {
  Vec x, z, lam;
};
BBlocks b_blocks(const AgentSpec& agent, Eigen::Ref<const Vec> x_i,
                 Eigen::Ref<const Vec> lam_i, const Vec& lap_lam_i, const Vec& lap_z_i);

// Per-agent update formulas shared with the message-passing simulation.
void fb_primal_aux(const AgentSpec& agent, double rho, double sigma,
                   const Vec& x_full, Eigen::Ref<const Vec> x_i,
                   Eigen::Ref<const Vec> z_i, Eigen::Ref<const Vec> lam_i,
                   const Vec& lap_lam_i, Eigen::Ref<Vec> x_new, Eigen::Ref<Vec> z_new);
void fb_dual(const AgentSpec& agent, double tau, Eigen::Ref<const Vec> x_i,
             Eigen::Ref<const Vec> x_new_i, Eigen::Ref<const Vec> lam_i,
             const Vec& lap_lam_i, const Vec& lap_refl_z_i, Eigen::Ref<Vec> lam_new);
void fbf_correct(const AgentSpec& agent, double rho, double sigma, double tau,
                 Eigen::Ref<const Vec> xt_i, Eigen::Ref<const Vec> zt_i,
                 Eigen::Ref<const Vec> lt_i, const DBlocks& d_v, const DBlocks& d_u,
                 Eigen::Ref<Vec> x_new, Eigen::Ref<Vec> z_new, Eigen::Ref<Vec> lam_new);
void fbhf_correct(const AgentSpec& agent, double rho, double sigma, double tau,
                  Eigen::Ref<const Vec> xt_i, Eigen::Ref<const Vec> zt_i,
                  Eigen::Ref<const Vec> lt_i, const BBlocks& b_v, const BBlocks& b_u,
                  Eigen::Ref<Vec> x_new, Eigen::Ref<Vec> z_new, Eigen::Ref<Vec> lam_new);

}  // namespace detail

}  // namespace gne
