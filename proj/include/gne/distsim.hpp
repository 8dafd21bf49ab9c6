#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gne/solvers.hpp"

namespace gne {

// Receive lists of one synchronous iteration: which senders each agent
// hears from, per phase and payload kind. Phase 2 carries the half-iterate
// (or, for FB, the updated auxiliary variable).
struct RoundSchedule {
  struct Receives {
    std::vector<int> x_from, lam_from, z_from;
  };
  std::vector<Receives> phase1;
  std::vector<Receives> phase2;

  static RoundSchedule standard(const GameInstance& game, const CommGraph& graph,
                                SolverKind kind);
};

struct MessageStatsRow {
  long iter = 0;
  int phase = 0;
  long messages = 0;
  long scalars = 0;
};

struct MessageStats {
  std::vector<MessageStatsRow> rows;
  long total_messages = 0;
  long total_scalars = 0;
};

struct DistOptions {
  SolverKind kind = SolverKind::FBF;
  StopRule stop;
  ExecMode mode = ExecMode::Serial;
  std::optional<Iterate> u0;
  std::optional<Vec> reference_x;
  std::optional<ConstantsBundle> constants;
  std::optional<StepConfig> forced_steps;
  std::function<void(long, const Iterate&)> observer;
  // Processing order of the agents inside each compute phase; results are
  // order-invariant and tests exercise that.
  std::optional<std::vector<int>> execution_order;
};

struct DistResult {
  Iterate u;
  RunTrace trace;
  MessageStats stats;
  SolveStatus status = SolveStatus::MaxIters;
  StepConfig steps;
};

// Barrier-synchronous rounds: every agent holds only its local data and
// reads neighbor values exclusively from delivered payloads. Arithmetic
// goes through the same kernels as the centralized engine, so trajectories
// match it bit for bit.
DistResult run_distributed(const GameInstance& game, const CommGraph& graph,
                           const DistOptions& options);

struct LocalityReport {
  bool pass = true;
  std::vector<std::string> violations;
  std::vector<std::string> touched;  // per agent, the fields each update reads
};

// Checks that every receive list stays within the declared neighborhoods
// and, by sampled perturbation, that no gradient oracle reads a block
// outside interference_neighbors + self. A custom schedule can be audited
// in place of the standard one.
LocalityReport locality_audit(const GameInstance& game, const CommGraph& graph,
                              SolverKind kind,
                              const std::optional<RoundSchedule>& schedule = std::nullopt,
                              int probes = 3, std::uint64_t seed = 99);

}  // namespace gne
