#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "gne/errors.hpp"
#include "gne/instance_io.hpp"
#include "gne/trace_io.hpp"
#include "test_helpers.hpp"

using namespace gne;
using namespace gnetest;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("cournot instances round-trip bit for bit") {
  CournotInstance inst = make_default_cournot(9);
  std::string path = temp_path("gne_io_cournot.json");
  save_instance(path, inst);
  InstanceDocument doc = load_instance(path);
  REQUIRE(doc.cournot.has_value());
  CHECK((doc.cournot->participation.array() == inst.participation.array()).all());
  CHECK((doc.game.affine->matrix.array() == inst.game.affine->matrix.array()).all());
  std::mt19937_64 rng(71);
  Vec x = sample_domain_point(inst.game, rng());
  CHECK((pseudo_gradient(doc.game, x) - pseudo_gradient(inst.game, x)).norm() == 0.0);
  CHECK((doc.graph.laplacian - inst.graph.laplacian).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("affine instances round-trip and rebuild their oracles") {
  TestProblem p = make_skew_game();
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
  std::string path = temp_path("gne_io_affine.json");
  save_instance(path, spec, p.graph);
  InstanceDocument doc = load_instance(path);
  CHECK(doc.game.num_agents() == 2);
  Vec x(2);
  x << 0.3, -1.7;
  CHECK((pseudo_gradient(doc.game, x) - pseudo_gradient(p.game, x)).norm() == 0.0);
  CHECK(doc.game.agents[0].interference_neighbors == std::vector<int>{1});
  std::remove(path.c_str());
}

TEST_CASE("graph presets load") {
  std::string path = temp_path("gne_io_graph.json");
  {
    std::ofstream out(path, std::ios::binary);
    out << R"({"format":"gne-instance","version":1,"n_agents":3,"m":1,
      "agents":[
        {"dim":1,"A":[[0]],"b":[0],"interference":[]},
        {"dim":1,"A":[[0]],"b":[0],"interference":[]},
        {"dim":1,"A":[[0]],"b":[0],"interference":[]}],
      "affine":[
        {"blocks":{"0":[[1]]},"offset":[0]},
        {"blocks":{"1":[[1]]},"offset":[0]},
        {"blocks":{"2":[[1]]},"offset":[0]}],
      "graph":{"type":"cycle","n":3}})";
  }
  InstanceDocument doc = load_instance(path);
  CHECK(doc.graph.max_degree == doctest::Approx(2.0));
  CHECK(doc.graph.op_norm == doctest::Approx(3.0).epsilon(1e-10));
  std::remove(path.c_str());
}

TEST_CASE("digest is stable per file and distinguishes seeds") {
  std::string p1 = temp_path("gne_io_d1.json");
  std::string p2 = temp_path("gne_io_d2.json");
  save_instance(p1, make_default_cournot(1));
  save_instance(p2, make_default_cournot(2));
  CHECK(instance_digest(p1) == instance_digest(p1));
  CHECK(instance_digest(p1) != instance_digest(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("malformed files are rejected") {
  std::string path = temp_path("gne_io_bad.json");
  {
    std::ofstream out(path, std::ios::binary);
    out << "{\"format\": \"other\"}";
  }
  CHECK_THROWS_AS(load_instance(path), ValidationError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_instance(temp_path("definitely_missing.json")), ValidationError);
}

TEST_CASE("a generated minimal instance is accepted by the solvers") {
  CournotParams params;
  params.n_firms = 2;
  params.n_markets = 1;
  params.seed = 2;
  CournotInstance inst = generate(params);
  std::string path = temp_path("gne_io_minimal.json");
  save_instance(path, inst);
  InstanceDocument doc = load_instance(path);
  SolveOptions o;
  o.kind = SolverKind::FBF;
  o.stop.fp_tol = 1e-9;
  o.stop.max_iters = 50000;
  SolveResult r = solve(doc.game, doc.graph, o);
  CHECK(r.status == SolveStatus::ConvergedFp);
  std::remove(path.c_str());
}

TEST_CASE("trace csv format: header, decimal points, line feeds, empty columns") {
  RunTrace trace;
  TraceRow row;
  row.iter = 0;
  row.fp_res = 0.5;
  row.kkt_stat = 1.25e-3;
  row.kkt_feas = 0;
  row.kkt_comp = 3.5;
  row.kkt_cons = 1e-12;
  row.cpu_s = 0.125;
  row.comm_rounds = 2;
  row.grad_evals = 2;
  trace.rows.push_back(row);
  row.iter = 1;
  row.rel_dist = 0.25;
  row.comm_rounds = 4;
  row.grad_evals = 4;
  trace.rows.push_back(row);

  std::string path = temp_path("gne_io_trace.csv");
  write_trace_csv(path, trace);
  std::string body = slurp(path);
  CHECK(body.find("iter,fp_res,kkt_stat,kkt_feas,kkt_comp,kkt_cons,rel_dist,cpu_s,"
                  "comm_rounds,grad_evals\n") == 0);
  CHECK(body.find('\r') == std::string::npos);
  CHECK(body.back() == '\n');
  // first row has no reference: empty rel_dist column
  CHECK(body.find("0,0.5,0.00125,0,3.5,9.9999999999999998e-13,,0.125,2,2\n") !=
        std::string::npos);
  CHECK(body.find("0.25") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("message csv format") {
  MessageStats stats;
  stats.rows.push_back({0, 1, 12, 36});
  stats.rows.push_back({0, 2, 8, 24});
  std::string path = temp_path("gne_io_msgs.csv");
  write_message_csv(path, stats);
  std::string body = slurp(path);
  CHECK(body.find("iter,phase,messages,scalars_sent\n") == 0);
  CHECK(body.find("0,1,12,36\n") != std::string::npos);
  CHECK(body.find("0,2,8,24\n") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("traces are reproducible apart from timing") {
  CournotInstance inst = make_default_cournot();
  auto run = [&] {
    SolveOptions o;
    o.kind = SolverKind::FBF;
    o.stop.fp_tol = 0;
    o.stop.kkt_tol = 0;
    o.stop.max_iters = 40;
    return solve(inst.game, inst.graph, o);
  };
  SolveResult a = run();
  SolveResult b = run();
  REQUIRE(a.trace.rows.size() == b.trace.rows.size());
  for (size_t k = 0; k < a.trace.rows.size(); ++k) {
    CHECK(a.trace.rows[k].fp_res == b.trace.rows[k].fp_res);
    CHECK(a.trace.rows[k].kkt_stat == b.trace.rows[k].kkt_stat);
    CHECK(a.trace.rows[k].kkt_comp == b.trace.rows[k].kkt_comp);
  }
}

}  // TEST_SUITE
