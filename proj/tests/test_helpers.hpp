#pragma once

// Shared fixtures: hand-built games, random iterates, and a finite-difference
// gradient oracle. The dense operator oracle lives in dense_oracle.hpp.

#include <random>

#include "gne/cournot.hpp"
#include "gne/instance_io.hpp"
#include "gne/solvers.hpp"

namespace gnetest {

using namespace gne;

struct TestProblem {
  GameInstance game;
  CommGraph graph;
};

// Two scalar agents with f_1 = x1*x2, f_2 = -x1*x2: the pseudo-gradient is
// the rotation (x2, -x1), monotone but not strongly monotone. No coupling.
inline TestProblem make_skew_game() {
  AffineGame spec;
  spec.m = 1;
  spec.agents.resize(2);
  for (int i = 0; i < 2; ++i) {
    spec.agents[i].dim = 1;
    spec.agents[i].coupling_block = Mat::Zero(1, 1);
    spec.agents[i].coupling_offset = Vec::Zero(1);
    spec.agents[i].grad_offset = Vec::Zero(1);
  }
  spec.agents[0].grad_blocks = {{1, Mat::Constant(1, 1, 1.0)}};
  spec.agents[1].grad_blocks = {{0, Mat::Constant(1, 1, -1.0)}};
  TestProblem p;
  p.game = build_game(spec);
  p.game.agents[0].f_value = [&](const Vec&) { return 0.0; };  // placeholder, set below
  p.game.agents[0].f_value = [](const Vec& x) { return x[0] * x[1]; };
  p.game.agents[1].f_value = [](const Vec& x) { return -x[0] * x[1]; };
  p.graph = build_graph(cycle_weights(2));
  return p;
}

// One agent, f = (c/2)(x - target)^2, scalar coupling row a*x <= b.
inline TestProblem make_single_quadratic(double c = 1.0, double target = 1.0,
                                         double a = 1.0, double b = 10.0,
                                         bool with_box = false) {
  AffineGame spec;
  spec.m = 1;
  spec.agents.resize(1);
  AffineAgentSpec& ag = spec.agents[0];
  ag.dim = 1;
  ag.coupling_block = Mat::Constant(1, 1, a);
  ag.coupling_offset = Vec::Constant(1, b);
  ag.grad_blocks = {{0, Mat::Constant(1, 1, c)}};
  ag.grad_offset = Vec::Constant(1, -c * target);
  if (with_box) {
    ag.box_lo = Vec::Constant(1, -5.0);
    ag.box_hi = Vec::Constant(1, 5.0);
  }
  TestProblem p;
  p.game = build_game(spec);
  p.game.agents[0].f_value = [c, target](const Vec& x) {
    return 0.5 * c * (x[0] - target) * (x[0] - target);
  };
  p.graph = build_graph(Mat::Zero(1, 1));
  return p;
}

inline CournotInstance make_default_cournot(std::uint64_t seed = 1) {
  CournotParams params;
  params.seed = seed;
  return generate(params);
}

inline Iterate random_iterate(const GameInstance& game, std::mt19937_64& rng,
                              double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Iterate it = Iterate::zero(game);
  for (Eigen::Index k = 0; k < it.x.size(); ++k) it.x[k] = u(rng);
  for (Eigen::Index k = 0; k < it.z.size(); ++k) it.z[k] = u(rng);
  for (Eigen::Index k = 0; k < it.lam.size(); ++k) it.lam[k] = u(rng);
  return it;
}

// Central finite differences of agent i's value oracle in its own block.
inline Vec fd_gradient_block(const GameInstance& game, int i, const Vec& x,
                             double h = 1e-6) {
  const AgentSpec& ag = game.agents[i];
  Vec g(ag.dim);
  Vec probe = x;
  for (int k = 0; k < ag.dim; ++k) {
    const Eigen::Index idx = game.offsets[i] + k;
    const double saved = probe[idx];
    probe[idx] = saved + h;
    const double fp = ag.f_value(probe);
    probe[idx] = saved - h;
    const double fm = ag.f_value(probe);
    probe[idx] = saved;
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double max_abs_diff(const Iterate& a, const Iterate& b) {
  double m = (a.x - b.x).cwiseAbs().maxCoeff();
  m = std::max(m, (a.z - b.z).cwiseAbs().maxCoeff());
  m = std::max(m, (a.lam - b.lam).cwiseAbs().maxCoeff());
  return m;
}

}  // namespace gnetest
