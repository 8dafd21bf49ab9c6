#include "gne/splitting.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "gne/errors.hpp"

namespace gne {

namespace {

void check_dims(const GameInstance& game, const CommGraph& graph, const Iterate& u,
                const char* where) {
  const Eigen::Index mn = static_cast<Eigen::Index>(game.m) * game.num_agents();
  if (graph.size() != game.num_agents())
    throw ValidationError(std::string(where) + ": graph size mismatch");
  if (u.x.size() != game.n || u.z.size() != mn || u.lam.size() != mn)
    throw ValidationError(std::string(where) + ": iterate has wrong dimensions");
}

}  // namespace

double psi_norm(const GameInstance& game, const StepConfig& steps, const Iterate& w) {
  double acc = 0.0;
  const int m = game.m;
  for (int i = 0; i < game.num_agents(); ++i) {
    acc += w.x.segment(game.offsets[i], game.agents[i].dim).squaredNorm() / steps.rho[i];
    acc += w.z.segment(static_cast<Eigen::Index>(i) * m, m).squaredNorm() / steps.sigma[i];
    acc += w.lam.segment(static_cast<Eigen::Index>(i) * m, m).squaredNorm() / steps.tau[i];
  }
  return std::sqrt(acc);
}

Iterate op_A(const GameInstance& game, const CommGraph& graph, const Iterate& u,
             ExecMode mode) {
  check_dims(game, graph, u, "op_A");
  const int m = game.m;
  Iterate out = Iterate::zero(game);
  BlockFn lam_of = [&](int j) -> Eigen::Ref<const Vec> {
    return u.lam.segment(static_cast<Eigen::Index>(j) * m, m);
  };
  agent_for(game.num_agents(), mode, [&](int i) {
    const AgentSpec& a = game.agents[i];
    out.x.segment(game.offsets[i], a.dim) = a.grad_f(u.x);
    out.lam.segment(static_cast<Eigen::Index>(i) * m, m) =
        laplacian_block(graph, i, m, lam_of) + a.coupling_offset;
  });
  return out;
}

Iterate op_B(const GameInstance& game, const CommGraph& graph, const Iterate& u,
             ExecMode mode) {
  check_dims(game, graph, u, "op_B");
  const int m = game.m;
  Iterate out = Iterate::zero(game);
  BlockFn lam_of = [&](int j) -> Eigen::Ref<const Vec> {
    return u.lam.segment(static_cast<Eigen::Index>(j) * m, m);
  };
  BlockFn z_of = [&](int j) -> Eigen::Ref<const Vec> {
    return u.z.segment(static_cast<Eigen::Index>(j) * m, m);
  };
  agent_for(game.num_agents(), mode, [&](int i) {
    const AgentSpec& a = game.agents[i];
    out.x.segment(game.offsets[i], a.dim) =
        a.coupling_block.transpose() * lam_of(i);
    out.z.segment(static_cast<Eigen::Index>(i) * m, m) =
        laplacian_block(graph, i, m, lam_of);
    out.lam.segment(static_cast<Eigen::Index>(i) * m, m) =
        -(a.coupling_block * game.block_of(u.x, i)) - laplacian_block(graph, i, m, z_of);
  });
  return out;
}

Iterate op_D(const GameInstance& game, const CommGraph& graph, const Iterate& u,
             ExecMode mode) {
  check_dims(game, graph, u, "op_D");
  const int m = game.m;
  Iterate out = Iterate::zero(game);
  BlockFn lam_of = [&](int j) -> Eigen::Ref<const Vec> {
    return u.lam.segment(static_cast<Eigen::Index>(j) * m, m);
  };
  BlockFn z_of = [&](int j) -> Eigen::Ref<const Vec> {
    return u.z.segment(static_cast<Eigen::Index>(j) * m, m);
  };
  agent_for(game.num_agents(), mode, [&](int i) {
    const AgentSpec& a = game.agents[i];
    Vec lap_lam = laplacian_block(graph, i, m, lam_of);
    Vec lap_z = laplacian_block(graph, i, m, z_of);
    detail::DBlocks d = detail::d_blocks(a, u.x, game.block_of(u.x, i), lam_of(i),
                                         lap_lam, lap_z);
    out.x.segment(game.offsets[i], a.dim) = d.x;
    out.z.segment(static_cast<Eigen::Index>(i) * m, m) = d.z;
    out.lam.segment(static_cast<Eigen::Index>(i) * m, m) = d.lam;
  });
  return out;
}

Iterate resolvent_C(const GameInstance& game, const Iterate& v, const StepConfig& steps,
                    ExecMode mode) {
  const Eigen::Index mn = static_cast<Eigen::Index>(game.m) * game.num_agents();
  if (v.x.size() != game.n || v.z.size() != mn || v.lam.size() != mn)
    throw ValidationError("resolvent_C: iterate has wrong dimensions");
  if (steps.rho.minCoeff() <= 0 || steps.sigma.minCoeff() <= 0 || steps.tau.minCoeff() <= 0)
    throw ValidationError("resolvent_C: steps must be positive");
  const int m = game.m;
  Iterate out = v;
  agent_for(game.num_agents(), mode, [&](int i) {
    const AgentSpec& a = game.agents[i];
    out.x.segment(game.offsets[i], a.dim) = a.prox_g(game.block_of(v.x, i), steps.rho[i]);
    out.lam.segment(static_cast<Eigen::Index>(i) * m, m) =
        v.lam.segment(static_cast<Eigen::Index>(i) * m, m).cwiseMax(0.0);
  });
  return out;
}

ConstantsBundle compute_constants(const GameInstance& game, const CommGraph& graph,
                                  bool allow_sampled) {
  ConstantsBundle c;
  c.kappa = graph.op_norm;
  c.delta_deg = graph.max_degree;

  // Block-diagonal stacking makes the norm the max over agent blocks.
  c.a_norm = 0.0;
  for (const AgentSpec& a : game.agents)
    c.a_norm = std::max(c.a_norm, spectral_norm(a.coupling_block));

  if (game.declared_beta) {
    c.beta = *game.declared_beta;
  } else if (game.affine) {
    c.beta = 1.0 / spectral_norm(game.affine->matrix);
  } else if (allow_sampled) {
    OperatorCertificates cert = sample_operator_certificates(game, 0, 0);
    if (cert.max_ratio <= 0.0)
      throw ValidationError("compute_constants: sampled Lipschitz ratio is zero");
    c.beta = 1.0 / cert.max_ratio;
    c.beta_empirical = true;
  } else {
    throw ValidationError("compute_constants: beta unavailable and sampling disabled");
  }
  if (!(c.beta > 0.0)) throw ValidationError("compute_constants: beta must be positive");

  if (game.declared_eta) {
    c.eta = *game.declared_eta;
  } else if (game.affine) {
    Mat sym = 0.5 * (game.affine->matrix + game.affine->matrix.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
    c.eta = std::max(0.0, es.eigenvalues().minCoeff());
  } else if (allow_sampled) {
    OperatorCertificates cert = sample_operator_certificates(game, 0, 0);
    c.eta = std::max(0.0, cert.min_modulus);
    c.eta_empirical = true;
  } else {
    c.eta = 0.0;
  }

  c.lips_A = 1.0 / c.beta + c.kappa;
  c.lips_B = 2.0 * c.a_norm + 2.0 * c.kappa;
  c.lips_D = c.lips_A + c.lips_B;
  if (c.eta > 0.0) {
    double deg_part = c.delta_deg > 0.0 ? 1.0 / (2.0 * c.delta_deg)
                                        : std::numeric_limits<double>::infinity();
    c.theta = std::min(deg_part, c.eta * c.beta * c.beta);
  }
  return c;
}

double phi_fb_gershgorin_bound(const StepConfig& steps, const GameInstance& game,
                               const CommGraph& graph) {
  double bound = std::numeric_limits<double>::infinity();
  for (int i = 0; i < game.num_agents(); ++i) {
    const Mat& a = game.agents[i].coupling_block;
    const double col_sum =
        a.size() == 0 ? 0.0 : a.cwiseAbs().colwise().sum().maxCoeff();
    const double row_sum =
        a.size() == 0 ? 0.0 : a.cwiseAbs().rowwise().sum().maxCoeff();
    const double deg2 = 2.0 * graph.degrees[i];
    bound = std::min(bound, 1.0 / steps.rho[i] - col_sum);
    bound = std::min(bound, 1.0 / steps.sigma[i] - deg2);
    bound = std::min(bound, 1.0 / steps.tau[i] - (row_sum + deg2));
  }
  return bound;
}

PhiFb build_phi_fb(const StepConfig& steps, const GameInstance& game,
                   const CommGraph& graph) {
  const int N = game.num_agents();
  const int m = game.m;
  const Eigen::Index mn = static_cast<Eigen::Index>(m) * N;
  const Eigen::Index dim = game.n + 2 * mn;
  if (dim > kDensePhiCap)
    throw ValidationError("build_phi_fb: dimension too large for a dense certificate");
  if (steps.rho.size() != N || steps.sigma.size() != N || steps.tau.size() != N)
    throw ValidationError("build_phi_fb: steps must have one entry per agent");

  PhiFb phi;
  phi.matrix = Mat::Zero(dim, dim);
  Mat lbar = Mat::Zero(mn, mn);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      if (graph.laplacian(i, j) != 0.0)
        lbar.block(static_cast<Eigen::Index>(i) * m, static_cast<Eigen::Index>(j) * m, m, m) =
            graph.laplacian(i, j) * Mat::Identity(m, m);

  for (int i = 0; i < N; ++i) {
    const AgentSpec& a = game.agents[i];
    phi.matrix.block(game.offsets[i], game.offsets[i], a.dim, a.dim) =
        (1.0 / steps.rho[i]) * Mat::Identity(a.dim, a.dim);
    phi.matrix.block(game.n + static_cast<Eigen::Index>(i) * m,
                     game.n + static_cast<Eigen::Index>(i) * m, m, m) =
        (1.0 / steps.sigma[i]) * Mat::Identity(m, m);
    phi.matrix.block(game.n + mn + static_cast<Eigen::Index>(i) * m,
                     game.n + mn + static_cast<Eigen::Index>(i) * m, m, m) =
        (1.0 / steps.tau[i]) * Mat::Identity(m, m);
    // off-diagonal coupling: -A^T in the (x, lam) blocks
    phi.matrix.block(game.offsets[i], game.n + mn + static_cast<Eigen::Index>(i) * m,
                     a.dim, m) = -a.coupling_block.transpose();
    phi.matrix.block(game.n + mn + static_cast<Eigen::Index>(i) * m, game.offsets[i],
                     m, a.dim) = -a.coupling_block;
  }
  phi.matrix.block(game.n, game.n + mn, mn, mn) = -lbar;
  phi.matrix.block(game.n + mn, game.n, mn, mn) = -lbar;

  Eigen::SelfAdjointEigenSolver<Mat> es(phi.matrix, Eigen::EigenvaluesOnly);
  phi.min_eig = es.eigenvalues().minCoeff();
  if (!(phi.min_eig > 0.0))
    throw PrerequisiteError("preconditioner is not positive definite; smallest eigenvalue " +
                            std::to_string(phi.min_eig));
  return phi;
}

namespace detail {

DBlocks d_blocks(const AgentSpec& agent, const Vec& x_full, Eigen::Ref<const Vec> x_i,
                 Eigen::Ref<const Vec> lam_i, const Vec& lap_lam_i, const Vec& lap_z_i) {
  DBlocks d;
  d.x = agent.grad_f(x_full) + agent.coupling_block.transpose() * lam_i;
  d.z = lap_lam_i;
  d.lam = lap_lam_i + agent.coupling_offset - agent.coupling_block * x_i - lap_z_i;
  return d;
}

void tilde_step(const AgentSpec& agent, double rho, double sigma, double tau,
                Eigen::Ref<const Vec> x_i, Eigen::Ref<const Vec> z_i,
                Eigen::Ref<const Vec> lam_i, const DBlocks& d, Eigen::Ref<Vec> xt,
                Eigen::Ref<Vec> zt, Eigen::Ref<Vec> lt) {
  xt = agent.prox_g(x_i - rho * d.x, rho);
  zt = z_i - sigma * d.z;
  lt = (lam_i - tau * d.lam).cwiseMax(0.0);
}

}  // namespace detail

}  // namespace gne
