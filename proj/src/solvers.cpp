#include "gne/solvers.hpp"

#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>
#include <ctime>

namespace gne {

const char* solver_kind_name(SolverKind k) {
  switch (k) {
    case SolverKind::FB: return "fb";
    case SolverKind::FBF: return "fbf";
    case SolverKind::FBHF: return "fbhf";
  }
  return "?";
}

std::optional<SolverKind> parse_solver_kind(const std::string& name) {
  if (name == "fb") return SolverKind::FB;
  if (name == "fbf") return SolverKind::FBF;
  if (name == "fbhf") return SolverKind::FBHF;
  return std::nullopt;
}

void StopRule::validate() const {
  // the iteration cap is always an active criterion
  if (max_iters < 1) throw ValidationError("stop rule: max_iters must be positive");
}

const char* solve_status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::ConvergedFp: return "converged_fp";
    case SolveStatus::ConvergedKkt: return "converged_kkt";
    case SolveStatus::MaxIters: return "max_iters";
  }
  return "?";
}

namespace {

double cpu_seconds() {
  timespec ts;
  clock_gettime(CLOCK_PROCESS_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

// Max row sum of |A_i^T| (columns of A_i) and of |A_i| (rows of A_i).
double max_col_abs_sum(const Mat& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().colwise().sum().maxCoeff();
}
double max_row_abs_sum(const Mat& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().rowwise().sum().maxCoeff();
}

}  // namespace

StepConfig select_steps_fb(const GameInstance& game, const CommGraph& graph,
                           const ConstantsBundle& constants, double margin) {
  if (!constants.theta)
    throw PrerequisiteError(
        "forward-backward requires a strongly monotone pseudo-gradient (eta > 0)");
  if (margin <= 0) throw ValidationError("select_steps_fb: margin must be positive");

  const int N = game.num_agents();
  StepConfig s;
  s.rho.resize(N);
  s.sigma.resize(N);
  s.tau.resize(N);
  for (int i = 0; i < N; ++i) {
    const Mat& a = game.agents[i].coupling_block;
    double deg2 = 2.0 * graph.degrees[i];
    s.rho[i] = 1.0 / (max_col_abs_sum(a) + margin);
    s.sigma[i] = 1.0 / (deg2 + margin);
    s.tau[i] = 1.0 / (max_row_abs_sum(a) + deg2 + margin);
  }
  s.refresh_norm();

  // Diagonal dominance makes Phi positive definite, but convergence also
  // needs alpha*theta > 1/2 with alpha the smallest eigenvalue of Phi.
  // Adding a uniform shift c to every inverse step moves that eigenvalue to
  // exactly min_eig + c; the shift targets alpha*theta = 3/4, safely inside
  // the admissible region (boundary steps converge but can oscillate). Past
  // desk scale the Gershgorin bound stands in for the eigenvalue, giving
  // smaller but still admissible steps.
  const double theta = *constants.theta;
  const bool dense = phi_fb_desk_scale(game);
  auto alpha_of = [&](const StepConfig& cfg) {
    return dense ? build_phi_fb(cfg, game, graph).min_eig
                 : phi_fb_gershgorin_bound(cfg, game, graph);
  };
  double alpha = alpha_of(s);
  if (alpha < 0.75 / theta) {
    double shift = (0.75 / theta - alpha) + margin;
    for (int i = 0; i < N; ++i) {
      s.rho[i] = 1.0 / (1.0 / s.rho[i] + shift);
      s.sigma[i] = 1.0 / (1.0 / s.sigma[i] + shift);
      s.tau[i] = 1.0 / (1.0 / s.tau[i] + shift);
    }
    s.refresh_norm();
    alpha = alpha_of(s);
  }
  if (alpha * theta <= 0.5)
    throw PrerequisiteError("select_steps_fb: cocoercivity step condition not met");
  return s;
}

StepConfig select_steps_fbf(const GameInstance& game, const ConstantsBundle& constants,
                            double safety) {
  if (!(constants.lips_D > 0))
    throw ValidationError("select_steps_fbf: L_D must be positive");
  if (!(safety > 0 && safety < 1))
    throw ValidationError("select_steps_fbf: safety must lie in (0,1)");
  return StepConfig::uniform(game.num_agents(), safety / constants.lips_D);
}

StepConfig select_steps_fbhf(const GameInstance& game, const ConstantsBundle& constants,
                             double safety) {
  if (!constants.theta)
    throw PrerequisiteError(
        "forward-backward-half-forward requires a strongly monotone pseudo-gradient "
        "(eta > 0)");
  if (!(safety > 0 && safety < 1))
    throw ValidationError("select_steps_fbhf: safety must lie in (0,1)");
  double bound = 2.0 * *constants.theta;
  if (constants.lips_B > 0) bound = std::min(bound, 1.0 / constants.lips_B);
  return StepConfig::uniform(game.num_agents(), safety * bound);
}

namespace detail {

BBlocks b_blocks(const AgentSpec& agent, Eigen::Ref<const Vec> x_i,
                 Eigen::Ref<const Vec> lam_i, const Vec& lap_lam_i, const Vec& lap_z_i) {
  BBlocks b;
  b.x = agent.coupling_block.transpose() * lam_i;
  b.z = lap_lam_i;
  b.lam = -(agent.coupling_block * x_i) - lap_z_i;
  return b;
}

void fb_primal_aux(const AgentSpec& agent, double rho, double sigma,
                   const Vec& x_full, Eigen::Ref<const Vec> x_i,
                   Eigen::Ref<const Vec> z_i, Eigen::Ref<const Vec> lam_i,
                   const Vec& lap_lam_i, Eigen::Ref<Vec> x_new, Eigen::Ref<Vec> z_new) {
  Vec forward = agent.grad_f(x_full) + agent.coupling_block.transpose() * lam_i;
  x_new = agent.prox_g(x_i - rho * forward, rho);
  z_new = z_i - sigma * lap_lam_i;
}

void fb_dual(const AgentSpec& agent, double tau, Eigen::Ref<const Vec> x_i,
             Eigen::Ref<const Vec> x_new_i, Eigen::Ref<const Vec> lam_i,
             const Vec& lap_lam_i, const Vec& lap_refl_z_i, Eigen::Ref<Vec> lam_new) {
  Vec refl_x = 2.0 * x_new_i - x_i;
  lam_new = (lam_i + tau * (agent.coupling_block * refl_x + lap_refl_z_i - lap_lam_i -
                            agent.coupling_offset))
                .cwiseMax(0.0);
}

void fbf_correct(const AgentSpec& agent, double rho, double sigma, double tau,
                 Eigen::Ref<const Vec> xt_i, Eigen::Ref<const Vec> zt_i,
                 Eigen::Ref<const Vec> lt_i, const DBlocks& d_v, const DBlocks& d_u,
                 Eigen::Ref<Vec> x_new, Eigen::Ref<Vec> z_new, Eigen::Ref<Vec> lam_new) {
  (void)agent;
  x_new = xt_i + rho * (d_v.x - d_u.x);
  z_new = zt_i + sigma * (d_v.z - d_u.z);
  lam_new = lt_i + tau * (d_v.lam - d_u.lam);
}

void fbhf_correct(const AgentSpec& agent, double rho, double sigma, double tau,
                  Eigen::Ref<const Vec> xt_i, Eigen::Ref<const Vec> zt_i,
                  Eigen::Ref<const Vec> lt_i, const BBlocks& b_v, const BBlocks& b_u,
                  Eigen::Ref<Vec> x_new, Eigen::Ref<Vec> z_new, Eigen::Ref<Vec> lam_new) {
  (void)agent;
  x_new = xt_i + rho * (b_v.x - b_u.x);
  z_new = zt_i + sigma * (b_v.z - b_u.z);
  lam_new = lt_i + tau * (b_v.lam - b_u.lam);
}

}  // namespace detail

namespace {

using detail::BBlocks;
using detail::DBlocks;

// Centralized iteration engine. All per-agent work goes through the shared
// kernels so the message-passing simulation can reproduce it bit for bit.
class Engine {
 public:
  Engine(const GameInstance& game, const CommGraph& graph, SolverKind kind,
         const StepConfig& steps, ExecMode mode)
      : game_(game), graph_(graph), kind_(kind), steps_(steps), mode_(mode),
        m_(game.m), N_(game.num_agents()) {
    d_v_.resize(N_);
    lap_lam_.resize(N_);
    lap_z_.resize(N_);
  }

  // cur -> next; tilde receives the half-iterate for FBF/FBHF.
  void advance(const Iterate& cur, Iterate& next, Iterate& tilde) {
    switch (kind_) {
      case SolverKind::FB: step_fb_impl(cur, next); tilde = next; break;
      case SolverKind::FBF: step_fbf_impl(cur, next, tilde); break;
      case SolverKind::FBHF: step_fbhf_impl(cur, next, tilde); break;
    }
  }

 private:
  Eigen::Ref<const Vec> zblk(const Vec& v, int i) const {
    return v.segment(static_cast<Eigen::Index>(i) * m_, m_);
  }
  Eigen::Ref<Vec> zblk(Vec& v, int i) const {
    return v.segment(static_cast<Eigen::Index>(i) * m_, m_);
  }

  void step_fb_impl(const Iterate& u, Iterate& next) {
    next = Iterate::zero(game_);
    BlockFn lam_of = [&](int j) -> Eigen::Ref<const Vec> { return zblk(u.lam, j); };
    agent_for(N_, mode_, [&](int i) {
      lap_lam_[i] = laplacian_block(graph_, i, m_, lam_of);
      detail::fb_primal_aux(game_.agents[i], steps_.rho[i], steps_.sigma[i], u.x,
                            game_.block_of(u.x, i), zblk(u.z, i), zblk(u.lam, i),
                            lap_lam_[i], next.x.segment(game_.offsets[i], game_.agents[i].dim),
                            zblk(next.z, i));
    });
    // second receive phase: reflected auxiliary variables of the neighbors
    Vec refl_z = 2.0 * next.z - u.z;
    BlockFn refl_z_of = [&](int j) -> Eigen::Ref<const Vec> { return zblk(refl_z, j); };
    agent_for(N_, mode_, [&](int i) {
      Vec lap_refl = laplacian_block(graph_, i, m_, refl_z_of);
      detail::fb_dual(game_.agents[i], steps_.tau[i], game_.block_of(u.x, i),
                      game_.block_of(next.x, i), zblk(u.lam, i), lap_lam_[i], lap_refl,
                      zblk(next.lam, i));
    });
  }

  void phase_one(const Iterate& v, Iterate& tilde) {
    BlockFn lam_of = [&](int j) -> Eigen::Ref<const Vec> { return zblk(v.lam, j); };
    BlockFn z_of = [&](int j) -> Eigen::Ref<const Vec> { return zblk(v.z, j); };
    agent_for(N_, mode_, [&](int i) {
      const AgentSpec& a = game_.agents[i];
      lap_lam_[i] = laplacian_block(graph_, i, m_, lam_of);
      lap_z_[i] = laplacian_block(graph_, i, m_, z_of);
      d_v_[i] = detail::d_blocks(a, v.x, game_.block_of(v.x, i), zblk(v.lam, i),
                                 lap_lam_[i], lap_z_[i]);
      detail::tilde_step(a, steps_.rho[i], steps_.sigma[i], steps_.tau[i],
                         game_.block_of(v.x, i), zblk(v.z, i), zblk(v.lam, i), d_v_[i],
                         tilde.x.segment(game_.offsets[i], a.dim), zblk(tilde.z, i),
                         zblk(tilde.lam, i));
    });
  }

  void step_fbf_impl(const Iterate& v, Iterate& next, Iterate& tilde) {
    next = Iterate::zero(game_);
    tilde = Iterate::zero(game_);
    phase_one(v, tilde);
    BlockFn lamt_of = [&](int j) -> Eigen::Ref<const Vec> { return zblk(tilde.lam, j); };
    BlockFn zt_of = [&](int j) -> Eigen::Ref<const Vec> { return zblk(tilde.z, j); };
    agent_for(N_, mode_, [&](int i) {
      const AgentSpec& a = game_.agents[i];
      Vec lap_lamt = laplacian_block(graph_, i, m_, lamt_of);
      Vec lap_zt = laplacian_block(graph_, i, m_, zt_of);
      DBlocks d_u = detail::d_blocks(a, tilde.x, game_.block_of(tilde.x, i),
                                     zblk(tilde.lam, i), lap_lamt, lap_zt);
      detail::fbf_correct(a, steps_.rho[i], steps_.sigma[i], steps_.tau[i],
                          game_.block_of(tilde.x, i), zblk(tilde.z, i), zblk(tilde.lam, i),
                          d_v_[i], d_u, next.x.segment(game_.offsets[i], a.dim),
                          zblk(next.z, i), zblk(next.lam, i));
    });
  }

  void step_fbhf_impl(const Iterate& v, Iterate& next, Iterate& tilde) {
    next = Iterate::zero(game_);
    tilde = Iterate::zero(game_);
    phase_one(v, tilde);
    BlockFn lamt_of = [&](int j) -> Eigen::Ref<const Vec> { return zblk(tilde.lam, j); };
    BlockFn zt_of = [&](int j) -> Eigen::Ref<const Vec> { return zblk(tilde.z, j); };
    agent_for(N_, mode_, [&](int i) {
      const AgentSpec& a = game_.agents[i];
      Vec lap_lamt = laplacian_block(graph_, i, m_, lamt_of);
      Vec lap_zt = laplacian_block(graph_, i, m_, zt_of);
      BBlocks bv = detail::b_blocks(a, game_.block_of(v.x, i), zblk(v.lam, i),
                                    lap_lam_[i], lap_z_[i]);
      BBlocks bu = detail::b_blocks(a, game_.block_of(tilde.x, i), zblk(tilde.lam, i),
                                    lap_lamt, lap_zt);
      detail::fbhf_correct(a, steps_.rho[i], steps_.sigma[i], steps_.tau[i],
                           game_.block_of(tilde.x, i), zblk(tilde.z, i),
                           zblk(tilde.lam, i), bv, bu,
                           next.x.segment(game_.offsets[i], a.dim), zblk(next.z, i),
                           zblk(next.lam, i));
    });
  }

  const GameInstance& game_;
  const CommGraph& graph_;
  SolverKind kind_;
  StepConfig steps_;
  ExecMode mode_;
  int m_, N_;
  std::vector<DBlocks> d_v_;
  std::vector<Vec> lap_lam_, lap_z_;
};

}  // namespace

Iterate step_fb(const GameInstance& game, const CommGraph& graph, const Iterate& u,
                const StepConfig& steps, ExecMode mode) {
  Engine eng(game, graph, SolverKind::FB, steps, mode);
  Iterate next, tilde;
  eng.advance(u, next, tilde);
  return next;
}

std::pair<Iterate, Iterate> step_fbf(const GameInstance& game, const CommGraph& graph,
                                     const Iterate& v, const StepConfig& steps,
                                     ExecMode mode) {
  Engine eng(game, graph, SolverKind::FBF, steps, mode);
  Iterate next, tilde;
  eng.advance(v, next, tilde);
  return {next, tilde};
}

std::pair<Iterate, Iterate> step_fbhf(const GameInstance& game, const CommGraph& graph,
                                      const Iterate& v, const StepConfig& steps,
                                      ExecMode mode) {
  Engine eng(game, graph, SolverKind::FBHF, steps, mode);
  Iterate next, tilde;
  eng.advance(v, next, tilde);
  return {next, tilde};
}

Iterate default_initial_iterate(const GameInstance& game) {
  Iterate u = Iterate::zero(game);
  for (int i = 0; i < game.num_agents(); ++i) {
    const AgentSpec& a = game.agents[i];
    if (a.box_lo && a.box_hi)
      u.x.segment(game.offsets[i], a.dim) = 0.5 * (*a.box_lo + *a.box_hi);
  }
  return u;
}

SolveResult solve(const GameInstance& game, const CommGraph& graph,
                  const SolveOptions& options) {
  options.stop.validate();
  auto wall_start = std::chrono::steady_clock::now();

  SolveResult result;
  if (options.forced_steps) {
    result.steps = *options.forced_steps;
  } else {
    ConstantsBundle constants =
        options.constants ? *options.constants : compute_constants(game, graph);
    switch (options.kind) {
      case SolverKind::FB:
        result.steps = select_steps_fb(game, graph, constants);
        if (phi_fb_desk_scale(game))
          build_phi_fb(result.steps, game, graph);  // certificate must hold
        else if (phi_fb_gershgorin_bound(result.steps, game, graph) <= 0.0)
          throw PrerequisiteError("preconditioner certificate failed");
        break;
      case SolverKind::FBF:
        result.steps = select_steps_fbf(game, constants);
        break;
      case SolverKind::FBHF:
        result.steps = select_steps_fbhf(game, constants);
        break;
    }
  }

  Engine engine(game, graph, options.kind, result.steps, options.mode);
  Iterate cur = options.u0 ? *options.u0 : default_initial_iterate(game);
  Iterate next, tilde;
  const long gev_per_iter = options.kind == SolverKind::FBF ? 2 : 1;
  const double ref_norm =
      options.reference_x ? std::max(1e-300, options.reference_x->norm()) : 0.0;

  if (options.observer) options.observer(0, cur);

  double cpu_acc = 0.0;
  result.status = SolveStatus::MaxIters;
  for (long k = 0; k < options.stop.max_iters; ++k) {
    double t0 = cpu_seconds();
    engine.advance(cur, next, tilde);
    cpu_acc += cpu_seconds() - t0;

    if (!next.all_finite())
      throw SolverDivergence("solver diverged: non-finite iterate", k, cur);

    double fp_res = (next - cur).norm() / std::max(1.0, cur.norm());
    const bool want_kkt = options.record_kkt || options.stop.kkt_tol > 0;
    KktResidual kkt;
    if (want_kkt) kkt = kkt_residual(game, next.x, next.lam, graph);

    TraceRow row;
    row.iter = k;
    row.fp_res = fp_res;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.kkt_stat = want_kkt ? kkt.stationarity : nan;
    row.kkt_feas = want_kkt ? kkt.primal_feasibility : nan;
    row.kkt_comp = want_kkt ? kkt.complementarity : nan;
    row.kkt_cons = want_kkt ? kkt.dual_consensus : nan;
    if (options.reference_x)
      row.rel_dist = (next.x - *options.reference_x).norm() / ref_norm;
    row.cpu_s = cpu_acc;
    row.comm_rounds = 2 * (k + 1);
    row.grad_evals = gev_per_iter * (k + 1);
    result.trace.rows.push_back(row);

    cur = next;
    if (options.observer) options.observer(k + 1, cur);

    if (options.stop.fp_tol > 0 && fp_res <= options.stop.fp_tol) {
      result.status = SolveStatus::ConvergedFp;
      break;
    }
    if (options.stop.kkt_tol > 0 && kkt.max_field() <= options.stop.kkt_tol) {
      result.status = SolveStatus::ConvergedKkt;
      break;
    }
  }

  result.u = cur;
  result.cpu_s = cpu_acc;
  result.wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return result;
}

}  // namespace gne
