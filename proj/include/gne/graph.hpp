#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>
#include <vector>

#include "gne/parallel.hpp"

namespace gne {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Communication graph for the dual-consensus layer. Immutable once built;
// safe to share across threads.
struct CommGraph {
  Mat weights;             // symmetric, nonnegative, zero diagonal
  Mat laplacian;           // diag(W*1) - W
  Vec degrees;             // W*1
  double max_degree = 0;   // largest weighted degree
  double op_norm = 0;      // spectral norm of the Laplacian
  // Per node, the positive-weight neighbors in ascending index order.
  std::vector<std::vector<std::pair<int, double>>> neighbor_lists;

  int size() const { return static_cast<int>(weights.rows()); }
};

// Validates symmetry, zero diagonal, nonnegativity and connectivity, then
// fills every derived field. Throws ValidationError on bad input.
CommGraph build_graph(const Mat& weights);

// Convenience constructors used by instance files and the benchmark setup.
Mat cycle_weights(int n, double w = 1.0);
Mat complete_weights(int n, double w = 1.0);
Mat cycle_plus_chords_weights(int n, const std::vector<std::pair<int, int>>& chords,
                              double w = 1.0);

// Reads the m-sized block of node j from some storage.
using BlockFn = std::function<Eigen::Ref<const Vec>(int)>;

// One block-row of (L (x) I_m) applied to stacked node blocks. Neighbor
// terms accumulate in ascending index order, so both the centralized engine
// and the message-passing simulation produce identical bits.
inline Vec laplacian_block(const CommGraph& g, int i, int m, const BlockFn& block) {
  Vec out = g.degrees[i] * block(i);
  for (const auto& [j, w] : g.neighbor_lists[i]) out -= w * block(j);
  (void)m;
  return out;
}

// (L (x) I_m) * stacked, computed blockwise without forming the Kronecker
// product. stacked must have dimension m*N.
Vec laplacian_apply(const CommGraph& g, int m, const Vec& stacked,
                    ExecMode mode = ExecMode::Serial);

// A linear map given by its action and the action of its adjoint.
struct LinearOperator {
  int rows = 0;
  int cols = 0;
  std::function<Vec(const Vec&)> apply;
  std::function<Vec(const Vec&)> apply_adjoint;
};

// Spectral norm. Dense inputs below dimension 2000 use an exact
// factorization; larger problems fall back to seeded power iteration on the
// Gram operator (relative accuracy 1e-8). Power iteration throws
// NonConvergenceError past the iteration cap, carrying its last estimate.
double spectral_norm(const Mat& a);
double spectral_norm(const LinearOperator& op);

}  // namespace gne
