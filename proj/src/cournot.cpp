#include "gne/cournot.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "gne/errors.hpp"

namespace gne {

double DrawSequence::uniform(double lo, double hi) {
  if (midpoint_) return 0.5 * (lo + hi);
  double u = static_cast<double>(state_() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

int DrawSequence::index(int n) {
  if (midpoint_) return 0;
  double u = static_cast<double>(state_() >> 11) * 0x1.0p-53;
  return std::min(n - 1, static_cast<int>(u * n));
}

void CournotParams::validate() const {
  if (n_firms < 1 || n_markets < 1)
    throw ValidationError("cournot: need at least one firm and one market");
  auto range_ok = [](double lo, double hi) { return lo > 0.0 && hi >= lo; };
  if (!range_ok(delta_lo, delta_hi) || !range_ok(market_cap_lo, market_cap_hi) ||
      !range_ok(pi_lo, pi_hi) || !range_ok(r_lo, r_hi) || !range_ok(pbar_lo, pbar_hi) ||
      !range_ok(d_lo, d_hi))
    throw ValidationError("cournot: every range needs 0 < lo <= hi");
  if (!(participation_prob > 0.0 && participation_prob <= 1.0))
    throw ValidationError("cournot: participation probability must lie in (0,1]");
  if (participation) {
    if (participation->rows() != n_firms || participation->cols() != n_markets)
      throw ValidationError("cournot: participation matrix has wrong shape");
    for (int i = 0; i < n_firms; ++i) {
      bool any = false;
      for (int j = 0; j < n_markets; ++j) {
        double v = (*participation)(i, j);
        if (v != 0.0 && v != 1.0)
          throw ValidationError("cournot: participation entries must be 0 or 1");
        any = any || v == 1.0;
      }
      if (!any)
        throw ValidationError("cournot: firm " + std::to_string(i) +
                              " participates in no market");
    }
  }
}

std::vector<std::pair<int, int>> cournot_chords(int n) {
  if (n < 6) return {};
  std::vector<std::pair<int, int>> chords = {
      {1, (7 * n) / 10}, {n / 4, (3 * n) / 5}};
  std::vector<std::pair<int, int>> out;
  for (auto [a, b] : chords) {
    if (a > b) std::swap(a, b);
    int gap = std::min(b - a, n - (b - a));
    if (a == b || gap <= 1) continue;  // self-loop or existing cycle edge
    if (std::find(out.begin(), out.end(), std::make_pair(a, b)) == out.end())
      out.push_back({a, b});
  }
  return out;
}

namespace {

// Immutable data shared by the per-firm oracles.
struct SharedData {
  int n_firms = 0, n_markets = 0;
  std::vector<int> offsets;                       // primal block offsets
  std::vector<std::vector<int>> firm_markets;     // ascending market ids
  // per market: (firm, local column of that market in the firm's block)
  std::vector<std::vector<std::pair<int, int>>> market_firms;
  std::vector<double> pi;
  std::vector<Vec> r;
  Vec pbar, d;
};

// Closed-form gradient block of firm i: for its a-th market j,
//   2 pi x[a] + r[a] - pbar_j + d_j * (aggregate supply in j) + d_j * x[a].
// Aggregate supply sums same-market firms in ascending order, so the oracle
// reads only interference neighbors.
Vec firm_gradient(const SharedData& sd, int i, const Vec& x) {
  const auto& markets = sd.firm_markets[i];
  Vec g(static_cast<Eigen::Index>(markets.size()));
  for (size_t a = 0; a < markets.size(); ++a) {
    int j = markets[a];
    double supply = 0.0;
    for (const auto& [k, col] : sd.market_firms[j]) supply += x[sd.offsets[k] + col];
    double xa = x[sd.offsets[i] + static_cast<int>(a)];
    g[static_cast<Eigen::Index>(a)] =
        2.0 * sd.pi[i] * xa + sd.r[i][static_cast<Eigen::Index>(a)] - sd.pbar[j] +
        sd.d[j] * supply + sd.d[j] * xa;
  }
  return g;
}

double firm_cost(const SharedData& sd, int i, const Vec& x) {
  const auto& markets = sd.firm_markets[i];
  double production = 0.0, revenue = 0.0;
  for (size_t a = 0; a < markets.size(); ++a) {
    int j = markets[a];
    double xa = x[sd.offsets[i] + static_cast<int>(a)];
    production += sd.pi[i] * xa * xa + sd.r[i][static_cast<Eigen::Index>(a)] * xa;
    double supply = 0.0;
    for (const auto& [k, col] : sd.market_firms[j]) supply += x[sd.offsets[k] + col];
    revenue += (sd.pbar[j] - sd.d[j] * supply) * xa;
  }
  return production - revenue;
}

}  // namespace

CournotInstance generate(const CournotParams& params) {
  params.validate();
  const int N = params.n_firms;
  const int m = params.n_markets;
  DrawSequence draw(params.seed, params.midpoint_mode);

  CournotInstance inst;
  inst.params = params;

  // 1) participation pattern, then repair passes for empty firms and
  //    markets served by fewer than two firms
  Mat part = Mat::Zero(N, m);
  if (params.participation) {
    part = *params.participation;
  } else {
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < m; ++j)
        if (draw.uniform(0.0, 1.0) < params.participation_prob) part(i, j) = 1.0;
    for (int i = 0; i < N; ++i)
      if (part.row(i).sum() == 0.0) part(i, draw.index(m)) = 1.0;
    for (int j = 0; j < m; ++j) {
      while (part.col(j).sum() < std::min(2.0, static_cast<double>(N))) {
        int start = draw.index(N);
        for (int step = 0; step < N; ++step) {
          int i = (start + step) % N;
          if (part(i, j) == 0.0) {
            part(i, j) = 1.0;
            break;
          }
        }
      }
    }
  }
  inst.participation = part;

  auto sd = std::make_shared<SharedData>();
  sd->n_firms = N;
  sd->n_markets = m;
  sd->firm_markets.resize(N);
  sd->market_firms.resize(m);
  sd->offsets.assign(N + 1, 0);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < m; ++j)
      if (part(i, j) == 1.0) {
        sd->market_firms[j].push_back({i, static_cast<int>(sd->firm_markets[i].size())});
        sd->firm_markets[i].push_back(j);
      }
    sd->offsets[i + 1] = sd->offsets[i] + static_cast<int>(sd->firm_markets[i].size());
  }
  inst.firm_markets = sd->firm_markets;

  // 2) remaining draws, firms/markets in ascending order
  inst.delta.resize(N);
  for (int i = 0; i < N; ++i) {
    int ni = static_cast<int>(sd->firm_markets[i].size());
    inst.delta[i] = Vec(ni);
    for (int a = 0; a < ni; ++a)
      inst.delta[i][a] = draw.uniform(params.delta_lo, params.delta_hi);
  }
  inst.market_cap = Vec(m);
  for (int j = 0; j < m; ++j)
    inst.market_cap[j] = draw.uniform(params.market_cap_lo, params.market_cap_hi);
  sd->pi.resize(N);
  for (int i = 0; i < N; ++i) sd->pi[i] = draw.uniform(params.pi_lo, params.pi_hi);
  sd->r.resize(N);
  for (int i = 0; i < N; ++i) {
    int ni = static_cast<int>(sd->firm_markets[i].size());
    sd->r[i] = Vec(ni);
    for (int a = 0; a < ni; ++a) sd->r[i][a] = draw.uniform(params.r_lo, params.r_hi);
  }
  sd->pbar = Vec(m);
  for (int j = 0; j < m; ++j) sd->pbar[j] = draw.uniform(params.pbar_lo, params.pbar_hi);
  sd->d = Vec(m);
  for (int j = 0; j < m; ++j) sd->d[j] = draw.uniform(params.d_lo, params.d_hi);

  inst.pi = sd->pi;
  inst.r = sd->r;
  inst.pbar = sd->pbar;
  inst.d = sd->d;

  // 3) assemble the game
  GameInstance& game = inst.game;
  game.m = m;
  game.agents.resize(N);
  Vec b_share = inst.market_cap / static_cast<double>(N);  // uniform split of b
  for (int i = 0; i < N; ++i) {
    AgentSpec& ag = game.agents[i];
    int ni = static_cast<int>(sd->firm_markets[i].size());
    ag.dim = ni;
    ag.coupling_block = Mat::Zero(m, ni);
    for (int a = 0; a < ni; ++a) ag.coupling_block(sd->firm_markets[i][a], a) = 1.0;
    ag.coupling_offset = b_share;
    ag.box_lo = Vec::Zero(ni);
    ag.box_hi = inst.delta[i];
    ag.prox_g = make_box_prox(*ag.box_lo, *ag.box_hi);
    ag.grad_f = [sd, i](const Vec& x) -> Vec { return firm_gradient(*sd, i, x); };
    ag.f_value = [sd, i](const Vec& x) -> double { return firm_cost(*sd, i, x); };
    std::vector<bool> seen(N, false);
    for (int j : sd->firm_markets[i])
      for (const auto& [k, col] : sd->market_firms[j]) {
        (void)col;
        if (k != i) seen[k] = true;
      }
    for (int k = 0; k < N; ++k)
      if (seen[k]) ag.interference_neighbors.push_back(k);
  }
  game.finalize();

  // dense affine model M x + q when the problem is desk-sized
  if (game.n <= 1500) {
    AffineGradientModel model;
    model.matrix = Mat::Zero(game.n, game.n);
    model.offset = Vec(game.n);
    for (int i = 0; i < N; ++i) {
      for (size_t a = 0; a < sd->firm_markets[i].size(); ++a) {
        int j = sd->firm_markets[i][a];
        int row = sd->offsets[i] + static_cast<int>(a);
        model.offset[row] = sd->r[i][static_cast<Eigen::Index>(a)] - sd->pbar[j];
        model.matrix(row, row) = 2.0 * sd->pi[i] + 2.0 * sd->d[j];
        for (const auto& [k, col] : sd->market_firms[j])
          if (k != i) model.matrix(row, sd->offsets[k] + col) = sd->d[j];
      }
    }
    game.affine = std::move(model);
    auto [eta, beta] = analytic_constants(inst);
    game.declared_eta = eta;
    game.declared_beta = beta;
  } else {
    // conservative closed-form bounds for large instances
    double pi_min = *std::min_element(sd->pi.begin(), sd->pi.end());
    double pi_max = *std::max_element(sd->pi.begin(), sd->pi.end());
    double d_max = sd->d.maxCoeff();
    double max_count = 0;
    for (int j = 0; j < m; ++j)
      max_count = std::max(max_count, static_cast<double>(sd->market_firms[j].size()));
    game.declared_eta = 2.0 * pi_min;
    game.declared_beta = 1.0 / (2.0 * pi_max + d_max * (max_count + 1.0));
  }

  inst.graph = build_graph(cycle_plus_chords_weights(N, cournot_chords(N)));
  return inst;
}

Vec analytic_pseudo_gradient(const CournotInstance& inst, const Vec& x) {
  // same per-agent closed form as the wired oracles
  return pseudo_gradient(inst.game, x);
}

std::pair<double, double> analytic_constants(const CournotInstance& inst) {
  if (!inst.game.affine)
    throw ValidationError("analytic_constants: dense model not assembled at this size");
  const Mat& M = inst.game.affine->matrix;
  Mat sym = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
  double eta = std::max(0.0, es.eigenvalues().minCoeff());
  double beta = 1.0 / spectral_norm(M);
  return {eta, beta};
}

}  // namespace gne
