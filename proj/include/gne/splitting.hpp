#pragma once

#include <optional>

#include "gne/graph.hpp"
#include "gne/model.hpp"

namespace gne {

// The stacked variable u = col(x, z, lambda): primal decisions, auxiliary
// consensus variables and local dual copies.
struct Iterate {
  Vec x;    // n
  Vec z;    // m*N
  Vec lam;  // m*N

  static Iterate zero(const GameInstance& game) {
    Iterate u;
    u.x = Vec::Zero(game.n);
    u.z = Vec::Zero(static_cast<Eigen::Index>(game.m) * game.num_agents());
    u.lam = u.z;
    return u;
  }

  double squared_norm() const {
    return x.squaredNorm() + z.squaredNorm() + lam.squaredNorm();
  }
  double norm() const { return std::sqrt(squared_norm()); }
  bool all_finite() const {
    return x.allFinite() && z.allFinite() && lam.allFinite();
  }

  Iterate& operator+=(const Iterate& o) { x += o.x; z += o.z; lam += o.lam; return *this; }
  Iterate& operator-=(const Iterate& o) { x -= o.x; z -= o.z; lam -= o.lam; return *this; }
  friend Iterate operator-(Iterate a, const Iterate& b) { a -= b; return a; }
  friend Iterate operator+(Iterate a, const Iterate& b) { a += b; return a; }
};

// Constants from the operator decomposition: Lipschitz moduli of the smooth
// and linear parts, spectral data of the graph, and the cocoercivity
// constant of the smooth part when strong monotonicity is declared.
struct ConstantsBundle {
  double beta = 0;       // F is (1/beta)-Lipschitz
  double eta = 0;        // strong-monotonicity modulus, 0 = merely monotone
  double kappa = 0;      // |L|
  double delta_deg = 0;  // max weighted degree
  double a_norm = 0;     // |blkdiag(A_1..A_N)|
  double lips_A = 0;     // 1/beta + kappa
  double lips_B = 0;     // 2|A| + 2 kappa
  double lips_D = 0;     // lips_A + lips_B
  std::optional<double> theta;  // min{1/(2 delta), eta beta^2}, defined iff eta > 0
  bool beta_empirical = false;  // sampled rather than declared/closed-form
  bool eta_empirical = false;
};

// Per-agent diagonal steps for the primal (rho), auxiliary (sigma) and dual
// (tau) blocks. psi_inv_norm is the largest step, |Psi^{-1}|.
struct StepConfig {
  Vec rho, sigma, tau;  // each of length N
  double psi_inv_norm = 0;

  static StepConfig uniform(int num_agents, double step) {
    StepConfig s;
    s.rho = Vec::Constant(num_agents, step);
    s.sigma = s.rho;
    s.tau = s.rho;
    s.psi_inv_norm = step;
    return s;
  }
  void refresh_norm() {
    psi_inv_norm = std::max({rho.maxCoeff(), sigma.maxCoeff(), tau.maxCoeff()});
  }
};

// ||w||_Psi with Psi = diag(rho^-1, sigma^-1, tau^-1) expanded blockwise.
double psi_norm(const GameInstance& game, const StepConfig& steps, const Iterate& w);

// Smooth single-valued part: col(F(x), 0, L lam + b_stacked).
Iterate op_A(const GameInstance& game, const CommGraph& graph, const Iterate& u,
             ExecMode mode = ExecMode::Serial);
// Skew/linear part: col(A^T lam, L lam, -A x - L z).
Iterate op_B(const GameInstance& game, const CommGraph& graph, const Iterate& u,
             ExecMode mode = ExecMode::Serial);
// op_A + op_B in one pass (a single gradient evaluation).
Iterate op_D(const GameInstance& game, const CommGraph& graph, const Iterate& u,
             ExecMode mode = ExecMode::Serial);

// Resolvent of Psi^{-1} C: blockwise prox on x, identity on z, projection
// onto the nonnegative orthant on lambda.
Iterate resolvent_C(const GameInstance& game, const Iterate& v, const StepConfig& steps,
                    ExecMode mode = ExecMode::Serial);

// Populates every constant. beta/eta come from declared values or the dense
// affine model when available; otherwise they are sampled (flagged
// empirical) unless allow_sampled is false, which raises ValidationError.
ConstantsBundle compute_constants(const GameInstance& game, const CommGraph& graph,
                                  bool allow_sampled = true);

// Dense preconditioning matrix of the forward-backward scheme together with
// its positive-definiteness certificate. Throws PrerequisiteError when the
// smallest eigenvalue is not positive. Only available at desk scale; larger
// problems fall back to the Gershgorin bound below.
struct PhiFb {
  Mat matrix;
  double min_eig = 0;
};
PhiFb build_phi_fb(const StepConfig& steps, const GameInstance& game,
                   const CommGraph& graph);

constexpr Eigen::Index kDensePhiCap = 4000;
inline bool phi_fb_desk_scale(const GameInstance& game) {
  return game.n + 2 * static_cast<Eigen::Index>(game.m) * game.num_agents() <=
         kDensePhiCap;
}

// Diagonal-dominance lower bound on the smallest eigenvalue of the
// preconditioner: min_i (Phi_ii - sum of off-diagonal row magnitudes).
double phi_fb_gershgorin_bound(const StepConfig& steps, const GameInstance& game,
                               const CommGraph& graph);

namespace detail {

// Agent-i blocks of the single-valued operators at one point. Shared by the
// centralized engine and the message-passing simulation so that both
// produce identical floating-point results.
struct DBlocks {
  Vec x;    // grad_i + A_i^T lam_i
  Vec z;    // (L lam)_i
  Vec lam;  // (L lam)_i + b_i - A_i x_i - (L z)_i
};

DBlocks d_blocks(const AgentSpec& agent, const Vec& x_full, Eigen::Ref<const Vec> x_i,
                 Eigen::Ref<const Vec> lam_i, const Vec& lap_lam_i, const Vec& lap_z_i);

// Backward step through the resolvent of Psi^{-1} C for one agent.
void tilde_step(const AgentSpec& agent, double rho, double sigma, double tau,
                Eigen::Ref<const Vec> x_i, Eigen::Ref<const Vec> z_i,
                Eigen::Ref<const Vec> lam_i, const DBlocks& d, Eigen::Ref<Vec> xt,
                Eigen::Ref<Vec> zt, Eigen::Ref<Vec> lt);

}  // namespace detail

}  // namespace gne
