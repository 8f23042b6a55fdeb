#pragma once

#include <cstdint>
#include <deque>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "safeset/covering.hpp"
#include "safeset/stats.hpp"

namespace safeset::quantify {

// Exact-match key for state vectors (states are copied around bit-exactly,
// so no tolerance is needed for set/graph bookkeeping).
struct StateKey {
  std::vector<std::uint64_t> bits;

  StateKey() = default;
  explicit StateKey(const core::StateVector& s);
  bool operator==(const StateKey&) const = default;
};

struct StateKeyHash {
  std::size_t operator()(const StateKey& k) const;
};

using StateSet = std::unordered_set<StateKey, StateKeyHash>;

// Directed graph over state vectors. Edges retain direction for audit;
// reachability runs on the undirected view (the connected component of the
// query), which is what lets failure evidence reach upstream anchors.
class StateGraph {
 public:
  void add_vertex(const core::StateVector& s);
  void add_edge(const core::StateVector& from, const core::StateVector& to);
  bool has_vertex(const core::StateVector& s) const;
  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<std::pair<core::StateVector, core::StateVector>>& edges() const {
    return edges_;
  }

  // All vertices connected to s (directly or transitively, either edge
  // direction), via depth-first search. Includes s when s is a vertex;
  // empty when it is not.
  std::vector<core::StateVector> reachable(const core::StateVector& s) const;

 private:
  std::unordered_map<StateKey, std::size_t, StateKeyHash> index_;
  std::vector<core::StateVector> vertices_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<std::pair<core::StateVector, core::StateVector>> edges_;
};

// FIFO buffer of states awaiting replay.
class ReplayBuffer {
 public:
  void append(core::StateVector s) { q_.push_back(std::move(s)); }
  core::StateVector pop();
  bool empty() const { return q_.empty(); }
  std::size_t size() const { return q_.size(); }

 private:
  std::deque<core::StateVector> q_;
};

// Candidate minimizing l2 distance after per-dimension normalization by the
// space's (hi - lo); ties broken by lowest index. Throws on empty input.
std::size_t norm_nearest_index(const std::vector<core::StateVector>& candidates,
                               const core::StateVector& s, const core::SpaceSpec& space);
const core::StateVector& norm_nearest(const std::vector<core::StateVector>& candidates,
                                      const core::StateVector& s, const core::SpaceSpec& space);

struct QuantifyParams {
  stats::ConfidenceSpec spec;
  cover::DeltaVector delta;
  int k = 1;
  int max_runs = 100000;
  std::uint64_t seed = 0;
  bool keep_log = true;
};

struct AuditEntry {
  int iteration = 0;
  core::StateVector s0;
  bool from_buffer = false;
  bool failure = false;
  int pruned_this_run = 0;
  int buffer_size = 0;  // after the iteration
  int streak = 0;       // clean-run counter after the iteration
};

struct QuantifyResult {
  cover::CoveringSet cover;  // surviving centroids (neighborhood union implied)
  int runs_total = 0;
  int failure_runs = 0;
  int pruned_centroids = 0;
  bool valid = false;  // false when max_runs was exhausted first
  StateGraph provenance;  // anchors/escape chains from clean runs
  StateGraph audit;       // consecutive-state edges along failure prefixes
  std::vector<AuditEntry> log;
};

// Prune a fresh grid covering of the state box by testing runs until
// min_samples(spec) consecutive clean runs land inside the surviving
// neighborhood union with an empty replay buffer.
//
// Per iteration: start from a uniform surviving centroid, or, when the
// buffer holds states from earlier failure runs, from the surviving
// centroid nearest the popped state. A failure run buffers every state on
// the failure prefix, prunes everything connected to those states through
// the provenance graph, logs the prefix edges for audit, and resets the
// clean counter. A clean run chains its out-of-cover states onto the
// provenance graph. Centroids born inside the unsafe region are pruned up
// front; if every centroid is pruned the (empty) result is returned
// immediately.
QuantifyResult quantify(const core::SpaceSpec& oss, core::SystemModel& system,
                        const stats::ActorSpec& actor, const QuantifyParams& params);

}  // namespace safeset::quantify
