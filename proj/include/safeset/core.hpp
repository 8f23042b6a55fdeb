#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "safeset/rng.hpp"

namespace safeset::core {

// A state or action is an ordered coordinate vector; per-dimension meaning
// (name, unit, kind, bounds) lives in the owning SpaceSpec.
using StateVector = std::vector<double>;
using ActionVector = std::vector<double>;

enum class DimKind { Continuous, Integer };

struct DimSpec {
  std::string name;
  std::string unit;
  DimKind kind = DimKind::Continuous;
  double lo = 0.0;
  double hi = 0.0;
};

// Bounded box (state space or action space) plus an optional failure
// predicate marking the unsafe region. The predicate must be total: it
// answers for any representable vector, inside the box or not.
struct SpaceSpec {
  std::string name;
  std::vector<DimSpec> dims;
  std::function<bool(const StateVector&)> failure;  // empty: no unsafe region

  std::size_t dim() const { return dims.size(); }
  bool contains(const StateVector& s) const;    // box membership, bounds inclusive
  bool in_failure(const StateVector& s) const;  // false when no predicate set
  void validate() const;  // throws std::invalid_argument on bad bounds
};

// A system under test. Episodic: reset() places the underlying state so that
// observed() == s0, step() advances it under one action, observed() projects
// the underlying state into the declared space. The underlying state may
// wander outside the observed box; the run engine decides what gets recorded.
// Equal (s0, seed) must reproduce an episode bit-exactly.
class SystemModel {
 public:
  virtual ~SystemModel() = default;
  virtual const SpaceSpec& space() const = 0;
  virtual std::string label() const = 0;
  virtual void reset(const StateVector& s0, std::uint64_t seed) = 0;
  virtual void step(const ActionVector& u) = 0;
  virtual StateVector observed() const = 0;
};

// A testing policy. `recorded` is the engine's current recorded state (the
// frozen/absorbed view); testbed-internal policies may downcast `sys` to
// read richer context than the recorded projection carries.
class PolicyModel {
 public:
  virtual ~PolicyModel() = default;
  virtual std::string label() const = 0;
  virtual ActionVector act(const SystemModel& sys, const StateVector& recorded) = 0;
  virtual void on_reset() {}  // clear per-episode internal state
};

struct RunRecord {
  StateVector s0;
  std::vector<StateVector> states;    // recorded trajectory, exactly k entries
  std::vector<ActionVector> actions;  // exactly k entries
  std::uint64_t seed = 0;
  bool hit_failure = false;
  int failure_index = -1;           // 1-based step index of the first failure
  std::vector<int> left_oss_steps;  // 1-based steps where the freeze rule applied
  bool ended_frozen = false;        // trajectory was still frozen at step k
};

// Either a policy or a fixed length-k action sequence (open-loop).
struct ActionSource {
  PolicyModel* policy = nullptr;
  const std::vector<ActionVector>* sequence = nullptr;
};

// Execute one run of k steps from s0.
//
// Recording rules, applied to each raw observation in this order:
//   - absorb: once a failure state is recorded, it repeats to the end;
//   - failure: a raw observation in the unsafe region is recorded and latched;
//   - in box: recorded as-is;
//   - outside box and not unsafe: the previous recorded state repeats
//     (freeze); recording resumes if the raw observation re-enters the box.
// The underlying system keeps stepping throughout. Throws
// std::invalid_argument for s0 outside the box or unsafe, k < 1, or an
// open-loop sequence whose length differs from k.
RunRecord execute_run(SystemModel& sys, const ActionSource& src, const StateVector& s0,
                      int k, std::uint64_t seed);

// Opaque comparable cost value; equality is structural on the serialized
// form. CostSequence is what termination rules see.
using CostValue = std::string;
using CostSequence = std::vector<CostValue>;
using CostFunction = std::function<CostValue(const RunRecord&)>;
using TerminationRule = std::function<bool(const CostSequence&)>;

// The failure-or-not check: "1" iff the run hit the unsafe region.
CostValue failure_cost(const RunRecord& run);

// Canonical exact encoding of (states, actions, cost) used by the
// distinct-sample rule; doubles are encoded by bit pattern.
std::string run_signature(const RunRecord& run, const CostValue& cost);

enum class AlgorithmKind { OpenLoop, PolicyDriven };

// A testing-algorithm descriptor: how initial states are drawn, where
// actions come from, the per-run cost, and the stop rule. `label` is the
// descriptor identity used when two algorithms must be told apart.
struct AlgorithmSpec {
  AlgorithmKind kind = AlgorithmKind::PolicyDriven;
  std::string label;
  int k = 1;
  std::function<StateVector(Rng&)> sample_s0;
  std::function<std::vector<ActionVector>(Rng&)> sample_actions;  // open-loop only
  PolicyModel* policy = nullptr;                                  // policy-driven only
  CostFunction cost;
  TerminationRule termination;
};

struct AlgorithmRunResult {
  CostSequence costs;
  std::vector<RunRecord> runs;
  bool terminated = false;
  int attempts = 0;  // total run attempts, duplicates included
};

// Iterate runs until the termination rule fires or max_runs attempts are
// spent. Duplicate (states, actions, cost) triples are discarded: they do
// not extend the cost sequence and the termination rule is not re-checked.
AlgorithmRunResult run_algorithm(const AlgorithmSpec& spec, SystemModel& system, int max_runs,
                                 std::uint64_t seed);

}  // namespace safeset::core
