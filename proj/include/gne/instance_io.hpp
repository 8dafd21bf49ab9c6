#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gne/cournot.hpp"
#include "gne/graph.hpp"
#include "gne/model.hpp"

namespace gne {

// Serializable description of a quadratic-plus-box game: each agent's
// gradient is a sum of affine blocks over itself and its interference
// neighbors. Arbitrary oracle instances stay code-constructed.
struct AffineAgentSpec {
  int dim = 0;
  Mat coupling_block;   // m x dim
  Vec coupling_offset;  // m
  std::optional<Vec> box_lo, box_hi;  // absent: g_i = 0
  // (source agent id -> dim x dim_source block), ascending ids, may include
  // the agent itself. grad_i(x) = sum_j block_j x_j + grad_offset.
  std::vector<std::pair<int, Mat>> grad_blocks;
  Vec grad_offset;
};

struct AffineGame {
  int m = 0;
  std::vector<AffineAgentSpec> agents;
  std::optional<double> eta, beta;
};

// Builds the runnable instance: oracles gather blocks in ascending id
// order, interference lists come from the block structure, and the dense
// affine model is assembled at desk scale.
GameInstance build_game(const AffineGame& spec);

// Instance files are JSON documents (schema in the README). Cournot
// instances are stored as parameters plus every draw, so loading replays
// generation bit for bit; the stored draws double as an integrity check.
struct InstanceDocument {
  GameInstance game;
  CommGraph graph;
  std::optional<CournotInstance> cournot;
};

void save_instance(const std::string& path, const CournotInstance& inst);
void save_instance(const std::string& path, const AffineGame& spec,
                   const CommGraph& graph);
InstanceDocument load_instance(const std::string& path);

// FNV-1a digest of the canonical document; keys reference-solution caches.
std::string instance_digest(const std::string& path);

}  // namespace gne
