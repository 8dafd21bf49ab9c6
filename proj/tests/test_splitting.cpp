#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "dense_oracle.hpp"
#include "gne/errors.hpp"
#include "test_helpers.hpp"

using namespace gne;
using namespace gnetest;

TEST_SUITE("splitting") {

TEST_CASE("op_A on a single-node instance") {
  // single agent, f = x^2/2, b = 2: the Laplacian part vanishes
  TestProblem p = make_single_quadratic(1.0, 0.0, 1.0, 2.0);
  Iterate u = Iterate::zero(p.game);
  u.x[0] = 3.0;
  u.lam[0] = 0.7;
  Iterate out = op_A(p.game, p.graph, u);
  CHECK(out.x[0] == doctest::Approx(3.0));
  CHECK(out.z.norm() == 0.0);
  CHECK(out.lam[0] == doctest::Approx(2.0));
}

TEST_CASE("op_A third block reduces to stacked offsets under dual consensus") {
  CournotInstance inst = make_default_cournot();
  Iterate u = Iterate::zero(inst.game);
  std::mt19937_64 rng(5);
  u = random_iterate(inst.game, rng);
  Vec block(inst.game.m);
  for (int k = 0; k < inst.game.m; ++k) block[k] = 0.1 * k - 0.2;
  for (int i = 0; i < inst.game.num_agents(); ++i)
    u.lam.segment(i * inst.game.m, inst.game.m) = block;
  Iterate out = op_A(inst.game, inst.graph, u);
  CHECK((out.lam - inst.game.stacked_b()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("operators match the dense assembled oracle on random points") {
  CournotInstance inst = make_default_cournot();
  DenseOracle oracle(inst.game, inst.graph);
  std::mt19937_64 rng(17);
  for (int t = 0; t < 5; ++t) {
    Iterate u = random_iterate(inst.game, rng, 2.0);
    CHECK(max_abs_diff(op_A(inst.game, inst.graph, u), oracle.op_a(u)) <= 1e-12);
    CHECK(max_abs_diff(op_B(inst.game, inst.graph, u), oracle.op_b(u)) <= 1e-12);
    CHECK(max_abs_diff(op_D(inst.game, inst.graph, u), oracle.op_d(u)) <= 1e-12);
  }
}

TEST_CASE("op_B with zero duals and auxiliaries reduces to the coupling image") {
  CournotInstance inst = make_default_cournot();
  std::mt19937_64 rng(19);
  Iterate u = Iterate::zero(inst.game);
  u.x = sample_domain_point(inst.game, rng());
  Iterate out = op_B(inst.game, inst.graph, u);
  CHECK(out.x.norm() == 0.0);
  CHECK(out.z.norm() == 0.0);
  DenseOracle oracle(inst.game, inst.graph);
  CHECK((out.lam + oracle.a_blk * u.x).cwiseAbs().maxCoeff() <= 1e-13);

  // consensus duals kill the z-block on any connected graph
  Iterate v = random_iterate(inst.game, rng);
  Vec block(inst.game.m);
  for (int k = 0; k < inst.game.m; ++k) block[k] = 0.4 * k - 1.0;
  for (int i = 0; i < inst.game.num_agents(); ++i)
    v.lam.segment(i * inst.game.m, inst.game.m) = block;
  CHECK(op_B(inst.game, inst.graph, v).z.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("op_D is the one-pass sum of op_A and op_B") {
  TestProblem p = make_skew_game();
  std::mt19937_64 rng(23);
  for (int t = 0; t < 10; ++t) {
    Iterate u = random_iterate(p.game, rng, 3.0);
    Iterate sum = op_A(p.game, p.graph, u) + op_B(p.game, p.graph, u);
    Iterate d = op_D(p.game, p.graph, u);
    CHECK(max_abs_diff(d, sum) <= 1e-15 * (1.0 + sum.norm()));
  }
}

TEST_CASE("op_D vanishes on the zero instance") {
  // F = 0, A = 0, b = 0, single node
  TestProblem p = make_single_quadratic(0.0, 0.0, 0.0, 0.0);
  std::mt19937_64 rng(29);
  Iterate u = random_iterate(p.game, rng);
  CHECK(op_D(p.game, p.graph, u).norm() == 0.0);
}

TEST_CASE("op_B skew inner product vanishes") {
  CournotInstance inst = make_default_cournot();
  std::mt19937_64 rng(31);
  for (int t = 0; t < 10; ++t) {
    Iterate u = random_iterate(inst.game, rng);
    Iterate v = random_iterate(inst.game, rng);
    Iterate du = op_B(inst.game, inst.graph, u) - op_B(inst.game, inst.graph, v);
    Iterate duu = u - v;
    double inner = du.x.dot(duu.x) + du.z.dot(duu.z) + du.lam.dot(duu.lam);
    CHECK(std::abs(inner) <= 1e-10 * (1.0 + duu.squared_norm()));
  }
}

TEST_CASE("symmetric part of the dense op_B assembly is positive semidefinite") {
  CournotInstance inst = make_default_cournot();
  DenseOracle oracle(inst.game, inst.graph);
  const Eigen::Index n = inst.game.n;
  const Eigen::Index mn = oracle.b_stack.size();
  Mat b = Mat::Zero(n + 2 * mn, n + 2 * mn);
  b.block(0, n + mn, n, mn) = oracle.a_blk.transpose();
  b.block(n, n + mn, mn, mn) = oracle.l_bar;
  b.block(n + mn, 0, mn, n) = -oracle.a_blk;
  b.block(n + mn, n, mn, mn) = -oracle.l_bar;
  Mat sym = 0.5 * (b + b.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("resolvent of C: prox on x, identity on z, projection on duals") {
  CournotInstance inst = make_default_cournot();
  std::mt19937_64 rng(37);
  Iterate v = random_iterate(inst.game, rng, 3.0);
  StepConfig s = StepConfig::uniform(inst.game.num_agents(), 0.3);
  Iterate out = resolvent_C(inst.game, v, s);
  CHECK((out.z - v.z).norm() == 0.0);
  CHECK(out.lam.minCoeff() >= 0.0);
  CHECK((out.lam - v.lam.cwiseMax(0.0)).norm() == 0.0);
  for (int i = 0; i < inst.game.num_agents(); ++i) {
    const AgentSpec& a = inst.game.agents[i];
    Vec xi = out.x.segment(inst.game.offsets[i], a.dim);
    CHECK((xi.array() >= a.box_lo->array() - 1e-15).all());
    CHECK((xi.array() <= a.box_hi->array() + 1e-15).all());
  }
}

TEST_CASE("constants: plug-in formulas") {
  // beta = 1, kappa = 0, |A| = 0
  TestProblem p = make_single_quadratic(1.0, 0.0, 0.0, 0.0);
  p.game.declared_beta = 1.0;
  ConstantsBundle c = compute_constants(p.game, p.graph);
  CHECK(c.lips_A == doctest::Approx(1.0));
  CHECK(c.lips_B == doctest::Approx(0.0));
  CHECK(c.lips_D == doctest::Approx(1.0));
  CHECK(c.lips_D == c.lips_A + c.lips_B);
}

TEST_CASE("constants: cocoercivity modulus formula") {
  // Delta = 2 (unit 3-cycle), eta = 0.5, beta = 1 -> theta = min{1/4, 1/2}
  AffineGame spec;
  spec.m = 1;
  spec.agents.resize(3);
  for (int i = 0; i < 3; ++i) {
    spec.agents[i].dim = 1;
    spec.agents[i].coupling_block = Mat::Zero(1, 1);
    spec.agents[i].coupling_offset = Vec::Zero(1);
    spec.agents[i].grad_blocks = {{i, Mat::Identity(1, 1)}};
    spec.agents[i].grad_offset = Vec::Zero(1);
  }
  spec.eta = 0.5;
  spec.beta = 1.0;
  GameInstance game = build_game(spec);
  CommGraph graph = build_graph(cycle_weights(3));
  ConstantsBundle c = compute_constants(game, graph);
  REQUIRE(c.theta.has_value());
  CHECK(*c.theta == doctest::Approx(0.25));
}

TEST_CASE("constants: cournot closed forms are finite, positive and certified") {
  CournotInstance inst = make_default_cournot();
  ConstantsBundle c = compute_constants(inst.game, inst.graph);
  CHECK(c.beta > 0);
  CHECK(c.eta > 0);
  CHECK(std::isfinite(c.lips_D));
  CHECK(c.lips_A > 0);
  CHECK(c.lips_B > 0);
  REQUIRE(c.theta.has_value());
  CHECK(*c.theta > 0);
  CHECK_FALSE(c.beta_empirical);
  // |A| equals the dense block-diagonal spectral norm
  DenseOracle oracle(inst.game, inst.graph);
  CHECK(c.a_norm == doctest::Approx(spectral_norm(oracle.a_blk)).epsilon(1e-9));
}

TEST_CASE("constants: sampling fallback flags empirical values") {
  TestProblem p = make_skew_game();
  p.game.affine.reset();
  p.game.declared_beta.reset();
  p.game.declared_eta.reset();
  ConstantsBundle c = compute_constants(p.game, p.graph);
  CHECK(c.beta_empirical);
  CHECK(c.beta > 0);
  CHECK_THROWS_AS(compute_constants(p.game, p.graph, /*allow_sampled=*/false),
                  ValidationError);
}

TEST_CASE("preconditioner: diagonal case is positive definite") {
  TestProblem p = make_single_quadratic(1.0, 0.0, 0.0, 0.0);  // A = 0, L = 0
  StepConfig s = StepConfig::uniform(1, 1.0);
  PhiFb phi = build_phi_fb(s, p.game, p.graph);
  CHECK(phi.min_eig == doctest::Approx(1.0));
}

TEST_CASE("preconditioner: selected cournot steps certify, huge steps reject") {
  CournotInstance inst = make_default_cournot();
  ConstantsBundle c = compute_constants(inst.game, inst.graph);
  StepConfig good = select_steps_fb(inst.game, inst.graph, c);
  PhiFb phi = build_phi_fb(good, inst.game, inst.graph);
  CHECK(phi.min_eig > 0);

  StepConfig huge = StepConfig::uniform(inst.game.num_agents(), 1e6);
  CHECK_THROWS_AS(build_phi_fb(huge, inst.game, inst.graph), PrerequisiteError);
}

TEST_CASE("sampled operator Lipschitz ratios respect the bundle constants") {
  CournotInstance inst = make_default_cournot();
  ConstantsBundle c = compute_constants(inst.game, inst.graph);
  std::mt19937_64 rng(41);
  double worst_a = 0, worst_b = 0, worst_d = 0;
  for (int t = 0; t < 1000; ++t) {
    Iterate u = random_iterate(inst.game, rng, 2.0);
    Iterate v = random_iterate(inst.game, rng, 2.0);
    double dn = (u - v).norm();
    if (dn == 0) continue;
    worst_a = std::max(worst_a,
                       (op_A(inst.game, inst.graph, u) - op_A(inst.game, inst.graph, v)).norm() / dn);
    worst_b = std::max(worst_b,
                       (op_B(inst.game, inst.graph, u) - op_B(inst.game, inst.graph, v)).norm() / dn);
    worst_d = std::max(worst_d,
                       (op_D(inst.game, inst.graph, u) - op_D(inst.game, inst.graph, v)).norm() / dn);
  }
  CHECK(worst_a <= c.lips_A + 1e-9);
  CHECK(worst_b <= c.lips_B + 1e-9);
  CHECK(worst_d <= c.lips_D + 1e-9);
}

TEST_CASE("resolvent of C is firmly nonexpansive (sampled)") {
  CournotInstance inst = make_default_cournot();
  StepConfig s = StepConfig::uniform(inst.game.num_agents(), 0.42);
  std::mt19937_64 rng(39);
  for (int t = 0; t < 300; ++t) {
    Iterate v = random_iterate(inst.game, rng, 3.0);
    Iterate w = random_iterate(inst.game, rng, 3.0);
    Iterate dr = resolvent_C(inst.game, v, s) - resolvent_C(inst.game, w, s);
    Iterate dv = v - w;
    double inner = dr.x.dot(dv.x) + dr.z.dot(dv.z) + dr.lam.dot(dv.lam);
    CHECK(dr.squared_norm() <= inner + 1e-12);
  }
}

TEST_CASE("sampled monotonicity and cocoercivity of op_A") {
  CournotInstance inst = make_default_cournot();
  ConstantsBundle c = compute_constants(inst.game, inst.graph);
  REQUIRE(c.theta.has_value());
  std::mt19937_64 rng(43);
  for (int t = 0; t < 300; ++t) {
    Iterate u = random_iterate(inst.game, rng, 2.0);
    Iterate v = random_iterate(inst.game, rng, 2.0);
    // restrict x to the domain, where monotonicity of F is declared
    u.x = sample_domain_point(inst.game, rng());
    v.x = sample_domain_point(inst.game, rng());
    Iterate da = op_A(inst.game, inst.graph, u) - op_A(inst.game, inst.graph, v);
    Iterate du = u - v;
    double inner = da.x.dot(du.x) + da.z.dot(du.z) + da.lam.dot(du.lam);
    CHECK(inner >= -1e-10);
    CHECK(inner >= *c.theta * da.squared_norm() * (1.0 - 1e-8));
  }
}

}  // TEST_SUITE
