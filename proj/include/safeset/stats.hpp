#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>

#include "safeset/core.hpp"
#include "safeset/covering.hpp"

namespace safeset::stats {

struct ConfidenceSpec {
  double epsilon = 0.0;  // allowed per-run escape probability, in (0,1)
  double beta = 0.0;     // allowed certificate failure probability, in (0,1)
};

// Smallest integer N with (1 - epsilon)^N <= beta. Throws
// std::invalid_argument outside (0,1) on either parameter.
int min_samples(double epsilon, double beta);

// The escape level certified by m clean runs: 1 - exp(ln(beta) / m).
double epsilon_from_samples(int m, double beta);

// Weight over states used for initial-state draws; empty means uniform.
using MassFunction = std::function<double(const core::StateVector&)>;

// Action source for validation/quantification runs: a testing policy, or in
// controlled mode an admissible action box from which one action per run is
// drawn uniformly and held for all k steps.
struct ActorSpec {
  core::PolicyModel* policy = nullptr;
  const core::SpaceSpec* action_box = nullptr;
  std::string label;

  bool controlled() const { return policy == nullptr; }
};

// Draw one action uniformly from the box (integer dimensions uniform over
// their integer range).
core::ActionVector sample_action(const core::SpaceSpec& box, Rng& rng);

struct SafeSetCertificate {
  cover::CoveringSet cover;
  ConfidenceSpec spec;
  std::string actor_label;
  std::string system_label;
  std::string mode;  // "policy" | "controlled"
  int runs_used = 0;
  std::uint64_t seed = 0;
};

struct Falsified {
  core::RunRecord run;
  int run_index = 0;        // 0-based index of the violating run
  std::string reason;       // "failure" | "escape"
};

using ValidateResult = std::variant<SafeSetCertificate, Falsified>;

inline bool certified(const ValidateResult& r) {
  return std::holds_alternative<SafeSetCertificate>(r);
}

// Draw N = min_samples(spec) runs with s0 i.i.d. from the candidate's
// centroids (uniform, or weighted by `mass`), actions from the actor, and
// certify iff every recorded trajectory stays inside the candidate's
// neighborhood union and never hits the unsafe region. The first violating
// run is returned otherwise. Throws std::invalid_argument when a candidate
// centroid lies in the unsafe region or the candidate is empty.
ValidateResult validate_safe_set(const cover::CoveringSet& candidate, const ActorSpec& actor,
                                 core::SystemModel& system, const ConfidenceSpec& spec, int k,
                                 std::uint64_t seed, const MassFunction& mass = {});

}  // namespace safeset::stats
