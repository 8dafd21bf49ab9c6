#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "gne/graph.hpp"
#include "gne/model.hpp"

namespace gne {

// Networked Cournot benchmark: firms sell into shared markets with capacity
// caps; production costs are strongly convex quadratics and prices fall
// linearly with aggregate supply.
struct CournotParams {
  int n_firms = 20;
  int n_markets = 7;
  double delta_lo = 1.0, delta_hi = 1.5;      // local capacity bounds
  double market_cap_lo = 0.5, market_cap_hi = 1.0;
  double pi_lo = 1.0, pi_hi = 8.0;            // quadratic cost weight
  double r_lo = 0.1, r_hi = 0.6;              // linear cost coefficients
  double pbar_lo = 2.0, pbar_hi = 4.0;        // price intercepts
  double d_lo = 0.5, d_hi = 1.0;              // price slopes
  double participation_prob = 0.35;
  // Optional explicit firm x market incidence (entries 0/1). When absent, a
  // seeded random pattern is drawn with every firm in >= 1 market and every
  // market served by >= 2 firms.
  std::optional<Mat> participation;
  std::uint64_t seed = 1;
  // Replaces every draw by its range midpoint (index draws by 0); the
  // instance becomes seed-independent.
  bool midpoint_mode = false;

  void validate() const;
};

struct CournotInstance {
  GameInstance game;
  CommGraph graph;
  CournotParams params;
  Mat participation;             // n_firms x n_markets, 0/1
  std::vector<std::vector<int>> firm_markets;   // ascending market ids per firm
  std::vector<double> pi;        // per firm
  std::vector<Vec> r;            // per firm, one entry per served market
  std::vector<Vec> delta;        // per firm, capacity upper bounds
  Vec market_cap;                // b, per market
  Vec pbar;                      // price intercepts
  Vec d;                         // price slopes (diagonal of D)
};

// Builds the instance with every random draw taken from one seeded stream
// in a fixed, documented order (see README). The dual communication graph
// is a cycle with two chords.
CournotInstance generate(const CournotParams& params);

// Closed-form pseudo-gradient of the generated game. Shares the per-agent
// formula with the instance's oracles, so the two agree exactly.
Vec analytic_pseudo_gradient(const CournotInstance& inst, const Vec& x);

// (eta, beta) from the dense affine model: eta is the smallest eigenvalue
// of the symmetric part (clamped at 0), 1/beta the spectral norm.
std::pair<double, double> analytic_constants(const CournotInstance& inst);

// The chords added to the dual cycle graph, 0-based. For 20 firms these are
// (1,14) and (5,12).
std::vector<std::pair<int, int>> cournot_chords(int n_firms);

// Portable uniform draws: raw 64-bit Mersenne Twister output mapped through
// (x >> 11) * 2^-53, so instances reproduce across standard libraries.
class DrawSequence {
 public:
  explicit DrawSequence(std::uint64_t seed, bool midpoint = false)
      : state_(seed), midpoint_(midpoint) {}
  double uniform(double lo, double hi);
  int index(int n);  // in [0, n)
 private:
  std::mt19937_64 state_;
  bool midpoint_;
};

}  // namespace gne
