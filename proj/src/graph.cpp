#include "gne/graph.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>

#include "gne/errors.hpp"

namespace gne {

namespace {

constexpr std::uint64_t kPowerIterationSeed = 0x9e3779b97f4a7c15ULL;
constexpr int kDenseCutoff = 2000;

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

std::string format_components(const std::vector<std::vector<int>>& comps) {
  std::ostringstream os;
  for (const auto& c : comps) {
    os << " {";
    for (size_t k = 0; k < c.size(); ++k) os << (k ? "," : "") << c[k];
    os << "}";
  }
  return os.str();
}

}  // namespace

CommGraph build_graph(const Mat& weights) {
  const int n = static_cast<int>(weights.rows());
  if (n == 0 || weights.cols() != n)
    throw ValidationError("graph weights must be a nonempty square matrix");

  const double scale = std::max(1.0, weights.cwiseAbs().maxCoeff());
  if ((weights - weights.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ValidationError("graph weights must be symmetric");
  if (weights.diagonal().cwiseAbs().maxCoeff() > 0.0)
    throw ValidationError("graph weights must have a zero diagonal");
  if (weights.minCoeff() < 0.0)
    throw ValidationError("graph weights must be nonnegative");

  CommGraph g;
  g.weights = 0.5 * (weights + weights.transpose());  // exact symmetry
  g.degrees = g.weights.rowwise().sum();
  g.laplacian = Mat(g.degrees.asDiagonal()) - g.weights;
  g.max_degree = n > 0 ? g.degrees.maxCoeff() : 0.0;

  g.neighbor_lists.resize(n);
  UnionFind uf(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && g.weights(i, j) > 0.0) {
        g.neighbor_lists[i].push_back({j, g.weights(i, j)});
        uf.unite(i, j);
      }

  std::vector<std::vector<int>> comps;
  {
    std::vector<int> root_to_comp(n, -1);
    for (int i = 0; i < n; ++i) {
      int r = uf.find(i);
      if (root_to_comp[r] < 0) {
        root_to_comp[r] = static_cast<int>(comps.size());
        comps.emplace_back();
      }
      comps[root_to_comp[r]].push_back(i);
    }
  }
  if (comps.size() > 1)
    throw ValidationError("graph is disconnected; components:" + format_components(comps));

  g.op_norm = spectral_norm(g.laplacian);
  return g;
}

Mat cycle_weights(int n, double w) {
  if (n < 1) throw ValidationError("cycle graph needs at least one node");
  Mat m = Mat::Zero(n, n);
  if (n == 2) {
    m(0, 1) = m(1, 0) = w;
    return m;
  }
  for (int i = 0; i + 1 < n; ++i) m(i, i + 1) = m(i + 1, i) = w;
  if (n > 2) m(0, n - 1) = m(n - 1, 0) = w;
  return m;
}

Mat complete_weights(int n, double w) {
  if (n < 1) throw ValidationError("complete graph needs at least one node");
  Mat m = Mat::Constant(n, n, w);
  m.diagonal().setZero();
  return m;
}

Mat cycle_plus_chords_weights(int n, const std::vector<std::pair<int, int>>& chords,
                              double w) {
  Mat m = cycle_weights(n, w);
  for (auto [a, b] : chords) {
    if (a < 0 || b < 0 || a >= n || b >= n || a == b)
      throw ValidationError("chord endpoints out of range");
    m(a, b) = m(b, a) = w;
  }
  return m;
}

Vec laplacian_apply(const CommGraph& g, int m, const Vec& stacked, ExecMode mode) {
  const int n = g.size();
  if (stacked.size() != static_cast<Eigen::Index>(m) * n)
    throw ValidationError("laplacian_apply: stacked vector has wrong dimension");
  Vec out(stacked.size());
  BlockFn block = [&](int j) -> Eigen::Ref<const Vec> {
    return stacked.segment(static_cast<Eigen::Index>(j) * m, m);
  };
  agent_for(n, mode, [&](int i) {
    out.segment(static_cast<Eigen::Index>(i) * m, m) = laplacian_block(g, i, m, block);
  });
  return out;
}

namespace {

double power_iteration(const std::function<Vec(const Vec&)>& gram, int dim) {
  std::mt19937_64 rng(kPowerIterationSeed);
  Vec v(dim);
  for (int i = 0; i < dim; ++i)
    v[i] = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
  double nv = v.norm();
  if (nv == 0.0) v[0] = 1.0; else v /= nv;

  double lambda = 0.0;
  const int cap = 100000;
  for (int it = 0; it < cap; ++it) {
    Vec w = gram(v);
    double next = v.dot(w);
    double wn = w.norm();
    if (wn == 0.0) return 0.0;  // operator is zero on the Krylov space
    v = w / wn;
    if (it > 0 && std::abs(next - lambda) <= 1e-8 * std::max(1.0, std::abs(next))) {
      return std::sqrt(std::max(0.0, next));
    }
    lambda = next;
  }
  throw NonConvergenceError("power iteration did not converge",
                            std::sqrt(std::max(0.0, lambda)));
}

}  // namespace

double spectral_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  const int r = static_cast<int>(a.rows());
  const int c = static_cast<int>(a.cols());
  if (std::max(r, c) < kDenseCutoff) {
    if (r == c && (a - a.transpose()).cwiseAbs().maxCoeff() == 0.0) {
      Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
      return es.eigenvalues().cwiseAbs().maxCoeff();
    }
    Eigen::JacobiSVD<Mat> svd(a);
    return svd.singularValues()[0];
  }
  auto gram = [&a](const Vec& v) -> Vec { return a.transpose() * (a * v); };
  return power_iteration(gram, c);
}

double spectral_norm(const LinearOperator& op) {
  if (op.rows == 0 || op.cols == 0) return 0.0;
  auto gram = [&op](const Vec& v) -> Vec { return op.apply_adjoint(op.apply(v)); };
  return power_iteration(gram, op.cols);
}

}  // namespace gne
