#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gne/graph.hpp"
#include "gne/parallel.hpp"

namespace gne {

// Oracle for nabla_{x_i} f_i: takes the full strategy vector, returns the
// agent's block. Must read only the blocks of interference_neighbors and i.
using GradOracle = std::function<Vec(const Vec&)>;
// Oracle for prox_{g_i}^{rho}: (point, positive step) -> point.
using ProxOracle = std::function<Vec(const Vec&, double)>;
// Optional value oracle for f_i, used by finite-difference checks.
using ValueOracle = std::function<double(const Vec&)>;

struct AgentSpec {
  int dim = 0;
  GradOracle grad_f;
  ProxOracle prox_g;
  Mat coupling_block;                       // A_i, m x dim
  Vec coupling_offset;                      // b_i, m
  std::vector<int> interference_neighbors;  // ascending, excludes i itself
  // Present when g_i is the indicator of a box; used for default starting
  // points and serialization.
  std::optional<Vec> box_lo, box_hi;
  ValueOracle f_value;  // may be empty
};

// Dense representation of an affine pseudo-gradient F(x) = matrix*x + offset.
// Set for quadratic games; enables closed-form constants and test oracles.
struct AffineGradientModel {
  Mat matrix;
  Vec offset;
};

struct GameInstance {
  std::vector<AgentSpec> agents;
  int m = 0;  // number of coupling constraints
  std::optional<double> declared_eta, declared_beta;
  std::optional<AffineGradientModel> affine;

  // Derived by finalize().
  std::vector<int> offsets;  // primal block offsets, offsets[N] == n
  int n = 0;

  int num_agents() const { return static_cast<int>(agents.size()); }
  int offset_of(int i) const { return offsets[i]; }
  Eigen::Ref<const Vec> block_of(const Vec& x, int i) const {
    return x.segment(offsets[i], agents[i].dim);
  }

  // Validates agent dimensions against m and computes offsets. Must be
  // called once after the agent list is assembled.
  void finalize();

  Vec stacked_b() const;  // col(b_1..b_N), dimension m*N
  Vec total_b() const;    // sum of b_i, dimension m
};

// Helpers for the common local-cost shapes.
ProxOracle make_box_prox(const Vec& lo, const Vec& hi);
ProxOracle make_identity_prox();

// col(grad_1(x), ..., grad_N(x)). Dimension-checked.
Vec pseudo_gradient(const GameInstance& game, const Vec& x,
                    ExecMode mode = ExecMode::Serial);

// Blockwise prox with one positive step per agent.
Vec apply_prox_block(const GameInstance& game, const Vec& v, const Vec& rho_per_agent,
                     ExecMode mode = ExecMode::Serial);

struct KktResidual {
  double stationarity = 0;        // unit-step prox residual of the first KKT line
  double primal_feasibility = 0;  // ||max(Ax - b, 0)||
  double complementarity = 0;     // |mean-dual . (Ax - b)|
  double dual_consensus = 0;      // ||(L (x) I_m) lambda||
  bool lambda_clipped = false;    // negative dual entries were clipped

  double max_field() const;
};

// Residuals of the consensus KKT system at (x, stacked duals). Negative dual
// entries are clipped to zero and flagged.
KktResidual kkt_residual(const GameInstance& game, const Vec& x, const Vec& lambda_stacked,
                         const CommGraph& graph);

struct FeasibilityReport {
  bool feasible = false;
  Vec coupling_violation;        // max(Ax - b, 0), dimension m
  double local_violation = 0.0;  // max over agents of ||prox(x_i) - x_i||
};

// Coupling rows within tol and every block a fixed point of its prox.
FeasibilityReport check_feasible(const GameInstance& game, const Vec& x,
                                 double tol = 1e-9);

// A point with every block inside dom(g_i), drawn from the given generator.
Vec sample_domain_point(const GameInstance& game, std::uint64_t seed);

// Sampled certificates for the standing assumptions on F. beta/eta <= 0
// skip the corresponding check.
struct OperatorCertificates {
  bool monotone = true;
  double min_inner = 0;     // smallest <F(x)-F(y), x-y> observed
  bool lipschitz_ok = true;
  double max_ratio = 0;     // largest ||F(x)-F(y)|| / ||x-y|| observed
  bool strongly_monotone_ok = true;
  double min_modulus = 0;   // smallest <F(x)-F(y), x-y> / ||x-y||^2 observed
};
OperatorCertificates sample_operator_certificates(const GameInstance& game, double beta,
                                                  double eta, int pairs = 1000,
                                                  std::uint64_t seed = 7);

}  // namespace gne
