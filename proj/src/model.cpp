#include "gne/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gne/errors.hpp"

namespace gne {

void GameInstance::finalize() {
  if (agents.empty()) throw ValidationError("game needs at least one agent");
  if (m < 1) throw ValidationError("number of coupling constraints must be positive");
  offsets.assign(agents.size() + 1, 0);
  for (size_t i = 0; i < agents.size(); ++i) {
    const AgentSpec& a = agents[i];
    if (a.dim < 1) throw ValidationError("agent dimension must be >= 1");
    if (a.coupling_block.rows() != m || a.coupling_block.cols() != a.dim)
      throw ValidationError("coupling block of agent " + std::to_string(i) +
                            " must be m x dim");
    if (a.coupling_offset.size() != m)
      throw ValidationError("coupling offset of agent " + std::to_string(i) +
                            " must have dimension m");
    if (!a.grad_f) throw ValidationError("agent gradient oracle missing");
    if (!a.prox_g) throw ValidationError("agent prox oracle missing");
    offsets[i + 1] = offsets[i] + a.dim;
  }
  n = offsets.back();
}

Vec GameInstance::stacked_b() const {
  Vec out(static_cast<Eigen::Index>(m) * num_agents());
  for (int i = 0; i < num_agents(); ++i)
    out.segment(static_cast<Eigen::Index>(i) * m, m) = agents[i].coupling_offset;
  return out;
}

Vec GameInstance::total_b() const {
  Vec out = Vec::Zero(m);
  for (const AgentSpec& a : agents) out += a.coupling_offset;
  return out;
}

ProxOracle make_box_prox(const Vec& lo, const Vec& hi) {
  if (lo.size() != hi.size() || (hi - lo).minCoeff() < 0)
    throw ValidationError("box bounds must satisfy lo <= hi");
  return [lo, hi](const Vec& v, double) -> Vec { return v.cwiseMax(lo).cwiseMin(hi); };
}

ProxOracle make_identity_prox() {
  return [](const Vec& v, double) -> Vec { return v; };
}

Vec pseudo_gradient(const GameInstance& game, const Vec& x, ExecMode mode) {
  if (x.size() != game.n)
    throw ValidationError("pseudo_gradient: x has wrong dimension");
  Vec out(game.n);
  agent_for(game.num_agents(), mode, [&](int i) {
    out.segment(game.offsets[i], game.agents[i].dim) = game.agents[i].grad_f(x);
  });
  return out;
}

Vec apply_prox_block(const GameInstance& game, const Vec& v, const Vec& rho_per_agent,
                     ExecMode mode) {
  if (v.size() != game.n)
    throw ValidationError("apply_prox_block: point has wrong dimension");
  if (rho_per_agent.size() != game.num_agents())
    throw ValidationError("apply_prox_block: one step per agent required");
  if (rho_per_agent.minCoeff() <= 0.0)
    throw ValidationError("apply_prox_block: steps must be positive");
  Vec out(game.n);
  agent_for(game.num_agents(), mode, [&](int i) {
    out.segment(game.offsets[i], game.agents[i].dim) =
        game.agents[i].prox_g(game.block_of(v, i), rho_per_agent[i]);
  });
  return out;
}

double KktResidual::max_field() const {
  return std::max(std::max(stationarity, primal_feasibility),
                  std::max(complementarity, dual_consensus));
}

KktResidual kkt_residual(const GameInstance& game, const Vec& x, const Vec& lambda_stacked,
                         const CommGraph& graph) {
  const int N = game.num_agents();
  const int m = game.m;
  if (x.size() != game.n) throw ValidationError("kkt_residual: x has wrong dimension");
  if (lambda_stacked.size() != static_cast<Eigen::Index>(m) * N)
    throw ValidationError("kkt_residual: duals have wrong dimension");
  if (graph.size() != N) throw ValidationError("kkt_residual: graph size mismatch");

  KktResidual r;
  Vec lam = lambda_stacked;
  if (lam.minCoeff() < 0.0) {
    lam = lam.cwiseMax(0.0);
    r.lambda_clipped = true;
  }

  Vec lam_mean = Vec::Zero(m);
  for (int i = 0; i < N; ++i) lam_mean += lam.segment(static_cast<Eigen::Index>(i) * m, m);
  lam_mean /= static_cast<double>(N);

  Vec grad = pseudo_gradient(game, x);
  double stat_sq = 0.0;
  Vec ax_total = Vec::Zero(m);
  for (int i = 0; i < N; ++i) {
    const AgentSpec& a = game.agents[i];
    Vec forward = game.block_of(x, i) -
                  (grad.segment(game.offsets[i], a.dim) + a.coupling_block.transpose() * lam_mean);
    Vec res = game.block_of(x, i) - a.prox_g(forward, 1.0);
    stat_sq += res.squaredNorm();
    ax_total += a.coupling_block * game.block_of(x, i);
  }
  r.stationarity = std::sqrt(stat_sq);

  Vec slack = ax_total - game.total_b();
  r.primal_feasibility = slack.cwiseMax(0.0).norm();
  r.complementarity = std::abs(lam_mean.dot(slack));
  r.dual_consensus = laplacian_apply(graph, m, lam).norm();
  return r;
}

FeasibilityReport check_feasible(const GameInstance& game, const Vec& x, double tol) {
  if (x.size() != game.n) throw ValidationError("check_feasible: x has wrong dimension");
  FeasibilityReport rep;
  Vec ax = Vec::Zero(game.m);
  double local = 0.0;
  for (int i = 0; i < game.num_agents(); ++i) {
    const AgentSpec& a = game.agents[i];
    ax += a.coupling_block * game.block_of(x, i);
    local = std::max(local, (a.prox_g(game.block_of(x, i), 1.0) - game.block_of(x, i)).norm());
  }
  rep.coupling_violation = (ax - game.total_b()).cwiseMax(0.0);
  rep.local_violation = local;
  rep.feasible = rep.coupling_violation.maxCoeff() <= tol && local <= tol;
  return rep;
}

Vec sample_domain_point(const GameInstance& game, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Vec x(game.n);
  for (int i = 0; i < game.num_agents(); ++i) {
    const AgentSpec& a = game.agents[i];
    Vec raw(a.dim);
    if (a.box_lo && a.box_hi) {
      for (int k = 0; k < a.dim; ++k) {
        double mid = 0.5 * ((*a.box_lo)[k] + (*a.box_hi)[k]);
        double half = 0.5 * ((*a.box_hi)[k] - (*a.box_lo)[k]);
        raw[k] = mid + half * unit(rng);
      }
    } else {
      for (int k = 0; k < a.dim; ++k) raw[k] = unit(rng);
    }
    // prox maps into dom(g) even when no box is declared
    x.segment(game.offsets[i], a.dim) = a.prox_g(raw, 1.0);
  }
  return x;
}

OperatorCertificates sample_operator_certificates(const GameInstance& game, double beta,
                                                  double eta, int pairs,
                                                  std::uint64_t seed) {
  OperatorCertificates cert;
  cert.min_inner = std::numeric_limits<double>::infinity();
  cert.min_modulus = std::numeric_limits<double>::infinity();
  cert.max_ratio = 0.0;
  for (int p = 0; p < pairs; ++p) {
    Vec x = sample_domain_point(game, seed + 2 * static_cast<std::uint64_t>(p));
    Vec y = sample_domain_point(game, seed + 2 * static_cast<std::uint64_t>(p) + 1);
    double dn = (x - y).norm();
    if (dn == 0.0) continue;
    Vec df = pseudo_gradient(game, x) - pseudo_gradient(game, y);
    double inner = df.dot(x - y);
    cert.min_inner = std::min(cert.min_inner, inner);
    cert.max_ratio = std::max(cert.max_ratio, df.norm() / dn);
    cert.min_modulus = std::min(cert.min_modulus, inner / (dn * dn));
  }
  cert.monotone = cert.min_inner >= -1e-10;
  cert.lipschitz_ok = beta <= 0.0 || cert.max_ratio <= (1.0 / beta) * (1.0 + 1e-10);
  cert.strongly_monotone_ok = eta <= 0.0 || cert.min_modulus >= eta * (1.0 - 1e-8);
  return cert;
}

}  // namespace gne
