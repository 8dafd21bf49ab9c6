#include "gne/distsim.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <numeric>
#include <sstream>

namespace gne {

namespace {

double cpu_seconds() {
  timespec ts;
  clock_gettime(CLOCK_PROCESS_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

std::vector<int> lambda_neighbors(const CommGraph& graph, int i) {
  std::vector<int> out;
  out.reserve(graph.neighbor_lists[i].size());
  for (const auto& [j, w] : graph.neighbor_lists[i]) out.push_back(j);
  return out;
}

}  // namespace

RoundSchedule RoundSchedule::standard(const GameInstance& game, const CommGraph& graph,
                                      SolverKind kind) {
  const int N = game.num_agents();
  RoundSchedule s;
  s.phase1.resize(N);
  s.phase2.resize(N);
  for (int i = 0; i < N; ++i) {
    std::vector<int> nl = lambda_neighbors(graph, i);
    s.phase1[i].x_from = game.agents[i].interference_neighbors;
    s.phase1[i].lam_from = nl;
    s.phase1[i].z_from = nl;
    switch (kind) {
      case SolverKind::FB:
        s.phase2[i].z_from = nl;  // updated auxiliary variable
        break;
      case SolverKind::FBF:
        s.phase2[i].x_from = game.agents[i].interference_neighbors;
        s.phase2[i].lam_from = nl;
        s.phase2[i].z_from = nl;
        break;
      case SolverKind::FBHF:
        s.phase2[i].lam_from = nl;
        s.phase2[i].z_from = nl;
        break;
    }
  }
  return s;
}

namespace {

using detail::BBlocks;
using detail::DBlocks;

// Everything one agent owns. Neighbor payload slots are aligned with the
// graph's ascending neighbor lists.
struct AgentLocal {
  Vec x, z, lam;
  Vec xt, zt, lamt;  // half-iterate; for FB, the phase-1 updates of x and z
  Vec x_view;        // local picture of the strategy profile
  Vec xt_view;
  DBlocks d_v;
  Vec lap_lam, lap_z;
  std::vector<Vec> nbr_lam, nbr_z;    // phase 1 payloads
  std::vector<Vec> nbr_lam2, nbr_z2;  // phase 2 payloads (tilde or z_new)
  std::vector<int> pos_of;            // node id -> slot, -1 if not a neighbor
};

class DistEngine {
 public:
  DistEngine(const GameInstance& game, const CommGraph& graph, SolverKind kind,
             const StepConfig& steps, ExecMode mode)
      : game_(game), graph_(graph), kind_(kind), steps_(steps), mode_(mode),
        m_(game.m), N_(game.num_agents()) {
    agents_.resize(N_);
    order_.resize(N_);
    std::iota(order_.begin(), order_.end(), 0);
    for (int i = 0; i < N_; ++i) {
      AgentLocal& a = agents_[i];
      const int deg = static_cast<int>(graph.neighbor_lists[i].size());
      a.nbr_lam.assign(deg, Vec::Zero(m_));
      a.nbr_z.assign(deg, Vec::Zero(m_));
      a.nbr_lam2.assign(deg, Vec::Zero(m_));
      a.nbr_z2.assign(deg, Vec::Zero(m_));
      a.pos_of.assign(N_, -1);
      for (int p = 0; p < deg; ++p) a.pos_of[graph.neighbor_lists[i][p].first] = p;
      a.x_view = Vec::Zero(game.n);
      a.xt_view = Vec::Zero(game.n);
    }
  }

  void set_order(const std::vector<int>& order) { order_ = order; }

  void load(const Iterate& u) {
    for (int i = 0; i < N_; ++i) {
      agents_[i].x = game_.block_of(u.x, i);
      agents_[i].z = u.z.segment(static_cast<Eigen::Index>(i) * m_, m_);
      agents_[i].lam = u.lam.segment(static_cast<Eigen::Index>(i) * m_, m_);
    }
  }

  Iterate snapshot() const {
    Iterate u = Iterate::zero(game_);
    for (int i = 0; i < N_; ++i) {
      u.x.segment(game_.offsets[i], game_.agents[i].dim) = agents_[i].x;
      u.z.segment(static_cast<Eigen::Index>(i) * m_, m_) = agents_[i].z;
      u.lam.segment(static_cast<Eigen::Index>(i) * m_, m_) = agents_[i].lam;
    }
    return u;
  }

  // One barrier-synchronous iteration; appends two delivery records.
  void round(long iter, MessageStats& stats) {
    deliver_phase1(iter, stats);
    compute_phase1();
    deliver_phase2(iter, stats);
    compute_phase2();
  }

 private:
  // The "network": copies sender state into receiver slots and accounts for
  // every payload. Receiver-driven, senders scanned in ascending order.
  void deliver_phase1(long iter, MessageStats& stats) {
    long messages = 0, scalars = 0;
    for (int i = 0; i < N_; ++i) {
      AgentLocal& a = agents_[i];
      a.x_view.setZero();
      a.x_view.segment(game_.offsets[i], game_.agents[i].dim) = a.x;
      for (int j : game_.agents[i].interference_neighbors) {
        a.x_view.segment(game_.offsets[j], game_.agents[j].dim) = agents_[j].x;
        ++messages;
        scalars += game_.agents[j].dim;
      }
      for (const auto& [j, w] : graph_.neighbor_lists[i]) {
        a.nbr_lam[a.pos_of[j]] = agents_[j].lam;
        a.nbr_z[a.pos_of[j]] = agents_[j].z;
        messages += 2;
        scalars += 2 * m_;
      }
    }
    stats.rows.push_back({iter, 1, messages, scalars});
    stats.total_messages += messages;
    stats.total_scalars += scalars;
  }

  void deliver_phase2(long iter, MessageStats& stats) {
    long messages = 0, scalars = 0;
    for (int i = 0; i < N_; ++i) {
      AgentLocal& a = agents_[i];
      if (kind_ == SolverKind::FBF) {
        a.xt_view.setZero();
        a.xt_view.segment(game_.offsets[i], game_.agents[i].dim) = a.xt;
        for (int j : game_.agents[i].interference_neighbors) {
          a.xt_view.segment(game_.offsets[j], game_.agents[j].dim) = agents_[j].xt;
          ++messages;
          scalars += game_.agents[j].dim;
        }
      }
      for (const auto& [j, w] : graph_.neighbor_lists[i]) {
        switch (kind_) {
          case SolverKind::FB:
            a.nbr_z2[a.pos_of[j]] = agents_[j].zt;  // z_new
            messages += 1;
            scalars += m_;
            break;
          case SolverKind::FBF:
          case SolverKind::FBHF:
            a.nbr_lam2[a.pos_of[j]] = agents_[j].lamt;
            a.nbr_z2[a.pos_of[j]] = agents_[j].zt;
            messages += 2;
            scalars += 2 * m_;
            break;
        }
      }
    }
    stats.rows.push_back({iter, 2, messages, scalars});
    stats.total_messages += messages;
    stats.total_scalars += scalars;
  }

  BlockFn inbox_lam(const AgentLocal& a) const {
    return [&a](int j) -> Eigen::Ref<const Vec> {
      return a.pos_of[j] < 0 ? Eigen::Ref<const Vec>(a.lam)
                             : Eigen::Ref<const Vec>(a.nbr_lam[a.pos_of[j]]);
    };
  }
  BlockFn inbox_z(const AgentLocal& a) const {
    return [&a](int j) -> Eigen::Ref<const Vec> {
      return a.pos_of[j] < 0 ? Eigen::Ref<const Vec>(a.z)
                             : Eigen::Ref<const Vec>(a.nbr_z[a.pos_of[j]]);
    };
  }

  void compute_phase1() {
    agent_for(N_, mode_, [&](int slot) {
      const int i = order_[slot];
      AgentLocal& a = agents_[i];
      const AgentSpec& ag = game_.agents[i];
      a.xt.resize(ag.dim);
      a.zt.resize(m_);
      a.lamt.resize(m_);
      a.lap_lam = laplacian_block(graph_, i, m_, inbox_lam(a));
      if (kind_ == SolverKind::FB) {
        detail::fb_primal_aux(ag, steps_.rho[i], steps_.sigma[i], a.x_view, a.x, a.z,
                              a.lam, a.lap_lam, a.xt, a.zt);
      } else {
        a.lap_z = laplacian_block(graph_, i, m_, inbox_z(a));
        a.d_v = detail::d_blocks(ag, a.x_view, a.x, a.lam, a.lap_lam, a.lap_z);
        detail::tilde_step(ag, steps_.rho[i], steps_.sigma[i], steps_.tau[i], a.x, a.z,
                           a.lam, a.d_v, a.xt, a.zt, a.lamt);
      }
    });
  }

  void compute_phase2() {
    agent_for(N_, mode_, [&](int slot) {
      const int i = order_[slot];
      AgentLocal& a = agents_[i];
      const AgentSpec& ag = game_.agents[i];
      switch (kind_) {
        case SolverKind::FB: {
          // reflected auxiliary blocks from the two delivered snapshots
          Vec refl_own = 2.0 * a.zt - a.z;
          Vec lap_refl = lap_refl_block(i, a, refl_own);
          Vec lam_new(m_);
          detail::fb_dual(ag, steps_.tau[i], a.x, a.xt, a.lam, a.lap_lam, lap_refl,
                          lam_new);
          a.x = a.xt;
          a.z = a.zt;
          a.lam = lam_new;
          break;
        }
        case SolverKind::FBF: {
          BlockFn lamt_of = [&](int j) -> Eigen::Ref<const Vec> {
            return a.pos_of[j] < 0 ? Eigen::Ref<const Vec>(a.lamt)
                                   : Eigen::Ref<const Vec>(a.nbr_lam2[a.pos_of[j]]);
          };
          BlockFn zt_of = [&](int j) -> Eigen::Ref<const Vec> {
            return a.pos_of[j] < 0 ? Eigen::Ref<const Vec>(a.zt)
                                   : Eigen::Ref<const Vec>(a.nbr_z2[a.pos_of[j]]);
          };
          Vec lap_lamt = laplacian_block(graph_, i, m_, lamt_of);
          Vec lap_zt = laplacian_block(graph_, i, m_, zt_of);
          DBlocks d_u = detail::d_blocks(ag, a.xt_view, a.xt, a.lamt, lap_lamt, lap_zt);
          Vec xn(ag.dim), zn(m_), ln(m_);
          detail::fbf_correct(ag, steps_.rho[i], steps_.sigma[i], steps_.tau[i], a.xt,
                              a.zt, a.lamt, a.d_v, d_u, xn, zn, ln);
          a.x = xn;
          a.z = zn;
          a.lam = ln;
          break;
        }
        case SolverKind::FBHF: {
          BlockFn lamt_of = [&](int j) -> Eigen::Ref<const Vec> {
            return a.pos_of[j] < 0 ? Eigen::Ref<const Vec>(a.lamt)
                                   : Eigen::Ref<const Vec>(a.nbr_lam2[a.pos_of[j]]);
          };
          BlockFn zt_of = [&](int j) -> Eigen::Ref<const Vec> {
            return a.pos_of[j] < 0 ? Eigen::Ref<const Vec>(a.zt)
                                   : Eigen::Ref<const Vec>(a.nbr_z2[a.pos_of[j]]);
          };
          Vec lap_lamt = laplacian_block(graph_, i, m_, lamt_of);
          Vec lap_zt = laplacian_block(graph_, i, m_, zt_of);
          BBlocks bv = detail::b_blocks(ag, a.x, a.lam, a.lap_lam, a.lap_z);
          BBlocks bu = detail::b_blocks(ag, a.xt, a.lamt, lap_lamt, lap_zt);
          Vec xn(ag.dim), zn(m_), ln(m_);
          detail::fbhf_correct(ag, steps_.rho[i], steps_.sigma[i], steps_.tau[i], a.xt,
                               a.zt, a.lamt, bv, bu, xn, zn, ln);
          a.x = xn;
          a.z = zn;
          a.lam = ln;
          break;
        }
      }
    });
  }

  Vec lap_refl_block(int i, const AgentLocal& a, const Vec& refl_own) {
    Vec out = graph_.degrees[i] * refl_own;
    for (const auto& [j, w] : graph_.neighbor_lists[i]) {
      Vec refl_j = 2.0 * a.nbr_z2[a.pos_of[j]] - a.nbr_z[a.pos_of[j]];
      out -= w * refl_j;
    }
    return out;
  }

  const GameInstance& game_;
  const CommGraph& graph_;
  SolverKind kind_;
  StepConfig steps_;
  ExecMode mode_;
  int m_, N_;
  std::vector<AgentLocal> agents_;
  std::vector<int> order_;
};

}  // namespace

DistResult run_distributed(const GameInstance& game, const CommGraph& graph,
                           const DistOptions& options) {
  options.stop.validate();
  DistResult result;
  if (options.forced_steps) {
    result.steps = *options.forced_steps;
  } else {
    ConstantsBundle constants =
        options.constants ? *options.constants : compute_constants(game, graph);
    switch (options.kind) {
      case SolverKind::FB:
        result.steps = select_steps_fb(game, graph, constants);
        if (phi_fb_desk_scale(game))
          build_phi_fb(result.steps, game, graph);
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
  if (options.execution_order) {
    if (static_cast<int>(options.execution_order->size()) != game.num_agents())
      throw ValidationError("run_distributed: execution order must list every agent");
  }

  DistEngine engine(game, graph, options.kind, result.steps, options.mode);
  if (options.execution_order) engine.set_order(*options.execution_order);

  Iterate cur = options.u0 ? *options.u0 : default_initial_iterate(game);
  engine.load(cur);
  const long gev_per_iter = options.kind == SolverKind::FBF ? 2 : 1;
  const double ref_norm =
      options.reference_x ? std::max(1e-300, options.reference_x->norm()) : 0.0;

  if (options.observer) options.observer(0, cur);

  double cpu_acc = 0.0;
  result.status = SolveStatus::MaxIters;
  for (long k = 0; k < options.stop.max_iters; ++k) {
    double t0 = cpu_seconds();
    engine.round(k, result.stats);
    cpu_acc += cpu_seconds() - t0;

    Iterate next = engine.snapshot();
    if (!next.all_finite())
      throw SolverDivergence("distributed run diverged: non-finite iterate", k, cur);

    double fp_res = (next - cur).norm() / std::max(1.0, cur.norm());
    KktResidual kkt = kkt_residual(game, next.x, next.lam, graph);

    TraceRow row;
    row.iter = k;
    row.fp_res = fp_res;
    row.kkt_stat = kkt.stationarity;
    row.kkt_feas = kkt.primal_feasibility;
    row.kkt_comp = kkt.complementarity;
    row.kkt_cons = kkt.dual_consensus;
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
  return result;
}

LocalityReport locality_audit(const GameInstance& game, const CommGraph& graph,
                              SolverKind kind,
                              const std::optional<RoundSchedule>& schedule, int probes,
                              std::uint64_t seed) {
  const int N = game.num_agents();
  LocalityReport rep;
  RoundSchedule sched =
      schedule ? *schedule : RoundSchedule::standard(game, graph, kind);

  auto in_list = [](const std::vector<int>& v, int j) {
    return std::find(v.begin(), v.end(), j) != v.end();
  };

  // receive lists must stay inside the declared neighborhoods
  for (int i = 0; i < N; ++i) {
    std::vector<int> nl = lambda_neighbors(graph, i);
    auto check = [&](const std::vector<int>& from, const std::vector<int>& allowed,
                     const char* field, int phase) {
      for (int j : from)
        if (j == i || !in_list(allowed, j)) {
          std::ostringstream os;
          os << "agent " << i << " phase " << phase << ": receives " << field
             << " from non-neighbor " << j;
          rep.violations.push_back(os.str());
        }
    };
    check(sched.phase1[i].x_from, game.agents[i].interference_neighbors, "x", 1);
    check(sched.phase1[i].lam_from, nl, "lambda", 1);
    check(sched.phase1[i].z_from, nl, "z", 1);
    check(sched.phase2[i].x_from, game.agents[i].interference_neighbors, "x", 2);
    check(sched.phase2[i].lam_from, nl, "lambda", 2);
    check(sched.phase2[i].z_from, nl, "z", 2);
  }

  // sampled probe: perturbing a non-neighbor block must leave the gradient
  // oracle's output unchanged
  for (int i = 0; i < N; ++i) {
    const AgentSpec& ag = game.agents[i];
    for (int p = 0; p < probes; ++p) {
      Vec base = sample_domain_point(game, seed + 31 * static_cast<std::uint64_t>(p));
      Vec g0 = ag.grad_f(base);
      for (int j = 0; j < N; ++j) {
        if (j == i || in_list(ag.interference_neighbors, j)) continue;
        Vec mod = base;
        mod.segment(game.offsets[j], game.agents[j].dim).array() += 1.0 + p;
        Vec g1 = ag.grad_f(mod);
        if ((g0.array() != g1.array()).any()) {
          std::ostringstream os;
          os << "agent " << i << ": gradient depends on x of non-neighbor " << j;
          rep.violations.push_back(os.str());
          break;
        }
      }
    }
  }

  auto list_str = [](const std::vector<int>& v) {
    std::ostringstream os;
    os << "{";
    for (size_t k = 0; k < v.size(); ++k) os << (k ? "," : "") << v[k];
    os << "}";
    return os.str();
  };
  for (int i = 0; i < N; ++i) {
    std::ostringstream os;
    os << "agent " << i << ": local {x_i,z_i,lam_i,A_i,b_i}"
       << "; phase1 reads x" << list_str(sched.phase1[i].x_from) << " lam"
       << list_str(sched.phase1[i].lam_from) << " z" << list_str(sched.phase1[i].z_from)
       << "; phase2 reads x" << list_str(sched.phase2[i].x_from) << " lam"
       << list_str(sched.phase2[i].lam_from) << " z"
       << list_str(sched.phase2[i].z_from);
    rep.touched.push_back(os.str());
  }

  rep.pass = rep.violations.empty();
  return rep;
}

}  // namespace gne
