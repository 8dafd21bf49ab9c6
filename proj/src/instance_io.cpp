#include "gne/instance_io.hpp"

#include <algorithm>
#include <fstream>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "gne/errors.hpp"

namespace gne {

using nlohmann::json;

namespace {

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const json& a) {
  Vec v(static_cast<Eigen::Index>(a.size()));
  for (size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Mat mat_from_json(const json& rows) {
  if (rows.empty()) return Mat(0, 0);
  Mat m(static_cast<Eigen::Index>(rows.size()),
        static_cast<Eigen::Index>(rows[0].size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size())
      throw ValidationError("instance file: ragged matrix");
    for (size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r][c].get<double>();
  }
  return m;
}

json graph_to_json(const CommGraph& g) {
  json edges = json::array();
  for (int i = 0; i < g.size(); ++i)
    for (const auto& [j, w] : g.neighbor_lists[i])
      if (j > i) edges.push_back({i, j, w});
  return {{"type", "edge_list"}, {"n", g.size()}, {"edges", edges}};
}

CommGraph graph_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  const int n = j.at("n").get<int>();
  double w = j.value("weight", 1.0);
  if (type == "cycle") return build_graph(cycle_weights(n, w));
  if (type == "complete") return build_graph(complete_weights(n, w));
  if (type == "cycle_plus_chords") {
    std::vector<std::pair<int, int>> chords;
    for (const auto& c : j.at("chords"))
      chords.push_back({c[0].get<int>(), c[1].get<int>()});
    return build_graph(cycle_plus_chords_weights(n, chords, w));
  }
  if (type == "edge_list") {
    Mat weights = Mat::Zero(n, n);
    for (const auto& e : j.at("edges")) {
      int a = e[0].get<int>(), b = e[1].get<int>();
      double ew = e[2].get<double>();
      if (a < 0 || b < 0 || a >= n || b >= n)
        throw ValidationError("instance file: edge endpoint out of range");
      weights(a, b) = weights(b, a) = ew;
    }
    return build_graph(weights);
  }
  throw ValidationError("instance file: unknown graph type '" + type + "'");
}

json cournot_to_json(const CournotInstance& inst) {
  const CournotParams& p = inst.params;
  json params = {{"n_firms", p.n_firms},
                 {"n_markets", p.n_markets},
                 {"delta", {p.delta_lo, p.delta_hi}},
                 {"market_cap", {p.market_cap_lo, p.market_cap_hi}},
                 {"pi", {p.pi_lo, p.pi_hi}},
                 {"r", {p.r_lo, p.r_hi}},
                 {"pbar", {p.pbar_lo, p.pbar_hi}},
                 {"d", {p.d_lo, p.d_hi}},
                 {"participation_prob", p.participation_prob},
                 {"seed", p.seed},
                 {"midpoint_mode", p.midpoint_mode}};
  if (p.participation) params["participation"] = mat_to_json(*p.participation);

  json delta = json::array(), r = json::array();
  for (const Vec& v : inst.delta) delta.push_back(vec_to_json(v));
  for (const Vec& v : inst.r) r.push_back(vec_to_json(v));
  json draws = {{"participation", mat_to_json(inst.participation)},
                {"delta", delta},
                {"market_cap", vec_to_json(inst.market_cap)},
                {"pi", inst.pi},
                {"r", r},
                {"pbar", vec_to_json(inst.pbar)},
                {"d", vec_to_json(inst.d)}};
  return {{"params", params}, {"draws", draws}};
}

CournotParams cournot_params_from_json(const json& j) {
  CournotParams p;
  p.n_firms = j.at("n_firms").get<int>();
  p.n_markets = j.at("n_markets").get<int>();
  auto range = [&](const char* key, double& lo, double& hi) {
    lo = j.at(key)[0].get<double>();
    hi = j.at(key)[1].get<double>();
  };
  range("delta", p.delta_lo, p.delta_hi);
  range("market_cap", p.market_cap_lo, p.market_cap_hi);
  range("pi", p.pi_lo, p.pi_hi);
  range("r", p.r_lo, p.r_hi);
  range("pbar", p.pbar_lo, p.pbar_hi);
  range("d", p.d_lo, p.d_hi);
  p.participation_prob = j.at("participation_prob").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.midpoint_mode = j.at("midpoint_mode").get<bool>();
  if (j.contains("participation")) p.participation = mat_from_json(j["participation"]);
  return p;
}

json document_root() {
  return {{"format", "gne-instance"}, {"version", 1}};
}

json agents_to_json(const GameInstance& game) {
  json agents = json::array();
  for (const AgentSpec& a : game.agents) {
    json ja = {{"dim", a.dim},
               {"A", mat_to_json(a.coupling_block)},
               {"b", vec_to_json(a.coupling_offset)},
               {"interference", a.interference_neighbors}};
    if (a.box_lo && a.box_hi) {
      ja["box_lo"] = vec_to_json(*a.box_lo);
      ja["box_hi"] = vec_to_json(*a.box_hi);
    }
    agents.push_back(ja);
  }
  return agents;
}

std::string dump_document(const json& doc) { return doc.dump(2) + "\n"; }

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << body;
  if (!out) throw ValidationError("write failed for '" + path + "'");
}

json read_document(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ValidationError("instance file '" + path + "' is not valid JSON: " + e.what());
  }
  if (doc.value("format", "") != "gne-instance")
    throw ValidationError("'" + path + "' is not a gne instance file");
  return doc;
}

}  // namespace

GameInstance build_game(const AffineGame& spec) {
  const int N = static_cast<int>(spec.agents.size());
  GameInstance game;
  game.m = spec.m;
  game.agents.resize(N);

  // shared immutable copy for the oracles
  auto blocks = std::make_shared<std::vector<AffineAgentSpec>>(spec.agents);
  std::vector<int> offsets(N + 1, 0);
  for (int i = 0; i < N; ++i) offsets[i + 1] = offsets[i] + spec.agents[i].dim;
  auto offs = std::make_shared<std::vector<int>>(offsets);

  for (int i = 0; i < N; ++i) {
    const AffineAgentSpec& sa = spec.agents[i];
    AgentSpec& ag = game.agents[i];
    ag.dim = sa.dim;
    ag.coupling_block = sa.coupling_block;
    ag.coupling_offset = sa.coupling_offset;
    if (sa.box_lo && sa.box_hi) {
      ag.box_lo = sa.box_lo;
      ag.box_hi = sa.box_hi;
      ag.prox_g = make_box_prox(*sa.box_lo, *sa.box_hi);
    } else {
      ag.prox_g = make_identity_prox();
    }
    if (sa.grad_offset.size() != sa.dim)
      throw ValidationError("affine agent: gradient offset has wrong dimension");
    for (const auto& [j, blk] : sa.grad_blocks) {
      if (j < 0 || j >= N) throw ValidationError("affine agent: block id out of range");
      if (blk.rows() != sa.dim || blk.cols() != spec.agents[j].dim)
        throw ValidationError("affine agent: gradient block has wrong shape");
      if (j != i) ag.interference_neighbors.push_back(j);
    }
    ag.grad_f = [blocks, offs, i](const Vec& x) -> Vec {
      const AffineAgentSpec& me = (*blocks)[i];
      Vec g = me.grad_offset;
      for (const auto& [j, blk] : me.grad_blocks)
        g += blk * x.segment((*offs)[j], blk.cols());
      return g;
    };
  }
  game.declared_eta = spec.eta;
  game.declared_beta = spec.beta;
  game.finalize();

  if (game.n <= 1500) {
    AffineGradientModel model;
    model.matrix = Mat::Zero(game.n, game.n);
    model.offset = Vec::Zero(game.n);
    for (int i = 0; i < N; ++i) {
      const AffineAgentSpec& sa = spec.agents[i];
      model.offset.segment(offsets[i], sa.dim) = sa.grad_offset;
      for (const auto& [j, blk] : sa.grad_blocks)
        model.matrix.block(offsets[i], offsets[j], sa.dim, spec.agents[j].dim) = blk;
    }
    game.affine = std::move(model);
  }
  return game;
}

void save_instance(const std::string& path, const CournotInstance& inst) {
  json doc = document_root();
  doc["n_agents"] = inst.game.num_agents();
  doc["m"] = inst.game.m;
  doc["agents"] = agents_to_json(inst.game);
  doc["graph"] = graph_to_json(inst.graph);
  doc["cournot"] = cournot_to_json(inst);
  write_file(path, dump_document(doc));
}

void save_instance(const std::string& path, const AffineGame& spec,
                   const CommGraph& graph) {
  GameInstance game = build_game(spec);
  json doc = document_root();
  doc["n_agents"] = game.num_agents();
  doc["m"] = game.m;
  doc["agents"] = agents_to_json(game);
  json affine = json::array();
  for (const AffineAgentSpec& sa : spec.agents) {
    json blocks = json::object();
    for (const auto& [j, blk] : sa.grad_blocks) blocks[std::to_string(j)] = mat_to_json(blk);
    affine.push_back({{"blocks", blocks}, {"offset", vec_to_json(sa.grad_offset)}});
  }
  doc["affine"] = affine;
  if (spec.eta) doc["declared_eta"] = *spec.eta;
  if (spec.beta) doc["declared_beta"] = *spec.beta;
  doc["graph"] = graph_to_json(graph);
  write_file(path, dump_document(doc));
}

InstanceDocument load_instance(const std::string& path) {
  json doc = read_document(path);
  InstanceDocument out;

  if (doc.contains("cournot")) {
    CournotParams params = cournot_params_from_json(doc["cournot"].at("params"));
    CournotInstance inst = generate(params);
    // stored draws double as an integrity check of the replay
    const json& draws = doc["cournot"].at("draws");
    auto same_mat = [](const Mat& a, const Mat& b) {
      return a.rows() == b.rows() && a.cols() == b.cols() &&
             (a.rows() == 0 || (a.array() == b.array()).all());
    };
    if (!same_mat(mat_from_json(draws.at("participation")), inst.participation) ||
        !same_mat(vec_from_json(draws.at("market_cap")), inst.market_cap) ||
        !same_mat(vec_from_json(draws.at("pbar")), inst.pbar) ||
        !same_mat(vec_from_json(draws.at("d")), inst.d))
      throw ValidationError("instance file '" + path +
                            "' does not replay to its stored draws");
    out.game = inst.game;
    out.graph = inst.graph;
    out.cournot = std::move(inst);
    return out;
  }

  if (!doc.contains("affine"))
    throw ValidationError("instance file '" + path +
                          "' has neither cournot draws nor affine gradients");
  const int N = doc.at("n_agents").get<int>();
  AffineGame spec;
  spec.m = doc.at("m").get<int>();
  const json& agents = doc.at("agents");
  const json& affine = doc.at("affine");
  if (static_cast<int>(agents.size()) != N || static_cast<int>(affine.size()) != N)
    throw ValidationError("instance file: agent count mismatch");
  spec.agents.resize(N);
  for (int i = 0; i < N; ++i) {
    AffineAgentSpec& sa = spec.agents[i];
    const json& ja = agents[i];
    sa.dim = ja.at("dim").get<int>();
    sa.coupling_block = mat_from_json(ja.at("A"));
    sa.coupling_offset = vec_from_json(ja.at("b"));
    if (ja.contains("box_lo")) {
      sa.box_lo = vec_from_json(ja["box_lo"]);
      sa.box_hi = vec_from_json(ja.at("box_hi"));
    }
    sa.grad_offset = vec_from_json(affine[i].at("offset"));
    std::vector<std::pair<int, Mat>> blocks;
    for (const auto& [key, val] : affine[i].at("blocks").items())
      blocks.push_back({std::stoi(key), mat_from_json(val)});
    std::sort(blocks.begin(), blocks.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    sa.grad_blocks = std::move(blocks);
  }
  if (doc.contains("declared_eta")) spec.eta = doc["declared_eta"].get<double>();
  if (doc.contains("declared_beta")) spec.beta = doc["declared_beta"].get<double>();
  out.game = build_game(spec);
  out.graph = graph_from_json(doc.at("graph"));
  if (out.graph.size() != out.game.num_agents())
    throw ValidationError("instance file: graph size does not match agent count");
  return out;
}

std::string instance_digest(const std::string& path) {
  json doc = read_document(path);
  std::string body = doc.dump();  // object keys are sorted, so this is canonical
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : body) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace gne
