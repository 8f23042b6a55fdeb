#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "safeset/quantify.hpp"
#include "safeset/stats.hpp"

namespace safeset::compare {

// Intersection-over-union of the centroid sets. 1.0 when both are empty.
// Throws std::invalid_argument on mismatched space or delta.
double iou(const cover::CoveringSet& a, const cover::CoveringSet& b);

// |A \ B| / |O_cover| on centroid counts.
double diff_fraction(const cover::CoveringSet& a, const cover::CoveringSet& b,
                     const cover::CoveringSet& o_cover);

// Partial order on testing algorithms through their quantified safe sets:
// a strictly smaller safe set means a more aggressive tester.
enum class AggOrder { More, Less, Equal, Incomparable };
AggOrder aggressiveness_order(const cover::CoveringSet& phi1, const cover::CoveringSet& phi2);

// Sum of p over Phi' \ Phi divided by the sum over Phi'. Requires
// Phi ⊆ Phi' centroid-wise. Empty mass function means uniform.
double mass_ratio(const cover::CoveringSet& phi_prime, const cover::CoveringSet& phi,
                  const stats::MassFunction& p);

enum class CompareOutcome {
  FalsifiedByTe2,        // te2 found a failure inside te1's quantified set
  Contained,             // all te2 validation runs stayed inside te1's set
  ContainedSmallEscape,  // escapes happened but carry mass below epsilon
  FullQuantification     // escape mass too large; te2 was quantified outright
};

struct AggressivenessVerdict {
  bool agg = false;  // te1 at-least-as-aggressive-as te2 confirmed
  CompareOutcome outcome = CompareOutcome::Contained;
  int runs_used = 0;  // te2 validation runs (te1 quantification excluded)
  double escape_mass_ratio = 0.0;
  int grown_centroids = 0;
  cover::CoveringSet phi1;  // te1's quantified cover
  cover::CoveringSet phi2;  // grown shadow cover, or te2's quantified cover
  int te2_quantify_runs = -1;  // set when full quantification ran
};

// One side of a comparison: the actor identity of a testing algorithm.
struct TestingAlgorithm {
  stats::ActorSpec actor;
};

struct CompareParams {
  stats::ConfidenceSpec spec;
  cover::DeltaVector delta;
  int k = 1;
  int max_runs = 100000;  // cap for each embedded quantification
  std::uint64_t seed = 0;
  stats::MassFunction p;  // initial-state mass over centroids; empty = uniform
};

// Decide whether te1 is more aggressive than or equally aggressive with te2:
// quantify te1's safe set, replay the confidence-mandated number of runs
// from its centroids under te2's actions, and classify the outcome (failure
// before the quota / contained / small escape mass / full te2
// quantification with a superset check). A precomputed te1 quantification
// may be passed to share it across comparisons.
AggressivenessVerdict compare_algorithms(const TestingAlgorithm& te1, const TestingAlgorithm& te2,
                                         const core::SpaceSpec& oss, core::SystemModel& system,
                                         const CompareParams& params,
                                         const quantify::QuantifyResult* phi1_precomputed = nullptr);

}  // namespace safeset::compare
