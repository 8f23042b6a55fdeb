#include "safeset/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace safeset::stats {

using core::ActionVector;
using core::StateVector;

int min_samples(double epsilon, double beta) {
  if (!(epsilon > 0.0) || !(epsilon < 1.0))
    throw std::invalid_argument("min_samples: epsilon must be in (0,1)");
  if (!(beta > 0.0) || !(beta < 1.0))
    throw std::invalid_argument("min_samples: beta must be in (0,1)");

  double log_q = std::log1p(-epsilon);  // ln(1 - epsilon) < 0
  double log_b = std::log(beta);
  int n = static_cast<int>(std::ceil(log_b / log_q));
  // Fix up against rounding in the division: the defining inequality is
  // n * ln(1-eps) <= ln(beta), i.e. (1-eps)^n <= beta.
  auto enough = [&](int m) { return static_cast<double>(m) * log_q <= log_b; };
  while (!enough(n)) ++n;
  while (n > 1 && enough(n - 1)) --n;
  return n;
}

double epsilon_from_samples(int m, double beta) {
  if (m < 1) throw std::invalid_argument("epsilon_from_samples: m must be >= 1");
  if (!(beta > 0.0) || !(beta < 1.0))
    throw std::invalid_argument("epsilon_from_samples: beta must be in (0,1)");
  return -std::expm1(std::log(beta) / static_cast<double>(m));
}

ActionVector sample_action(const core::SpaceSpec& box, Rng& rng) {
  ActionVector u(box.dim());
  for (std::size_t d = 0; d < box.dim(); ++d) {
    const auto& dim = box.dims[d];
    if (dim.kind == core::DimKind::Integer) {
      auto span = static_cast<std::uint64_t>(dim.hi - dim.lo) + 1;
      u[d] = dim.lo + static_cast<double>(rng.next_below(span));
    } else {
      u[d] = rng.uniform(dim.lo, dim.hi);
    }
  }
  return u;
}

namespace {

// Index draw from centroids by cumulative mass; uniform when mass is empty.
std::size_t draw_centroid(const std::vector<StateVector>& centroids, const MassFunction& mass,
                          Rng& rng) {
  if (!mass) return static_cast<std::size_t>(rng.next_below(centroids.size()));
  double total = 0.0;
  std::vector<double> cum(centroids.size());
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    double w = mass(centroids[i]);
    if (w < 0.0) throw std::invalid_argument("mass function returned a negative weight");
    total += w;
    cum[i] = total;
  }
  if (!(total > 0.0)) throw std::invalid_argument("mass function has zero total mass");
  double x = rng.next_double() * total;
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    if (x < cum[i]) return i;
  }
  return centroids.size() - 1;
}

}  // namespace

ValidateResult validate_safe_set(const cover::CoveringSet& candidate, const ActorSpec& actor,
                                 core::SystemModel& system, const ConfidenceSpec& spec, int k,
                                 std::uint64_t seed, const MassFunction& mass) {
  if (candidate.empty()) throw std::invalid_argument("validate_safe_set: empty candidate");
  for (const auto& c : candidate.centroids) {
    if (system.space().in_failure(c))
      throw std::invalid_argument("validate_safe_set: candidate centroid in the unsafe region");
  }
  if (!actor.policy && !actor.action_box)
    throw std::invalid_argument("validate_safe_set: actor has no action source");

  const int n = min_samples(spec.epsilon, spec.beta);
  Rng sampler(child_seed(seed, 0));

  for (int i = 0; i < n; ++i) {
    const StateVector& s0 = candidate.centroids[draw_centroid(candidate.centroids, mass, sampler)];
    std::uint64_t run_seed = child_seed(seed, 1 + static_cast<std::uint64_t>(i));

    core::ActionSource src;
    std::vector<ActionVector> seq;
    if (actor.controlled()) {
      // one admissible action per run, held for the whole horizon
      Rng action_rng(child_seed(run_seed, 0x5eed));
      seq.assign(static_cast<std::size_t>(k), sample_action(*actor.action_box, action_rng));
      src.sequence = &seq;
    } else {
      src.policy = actor.policy;
    }

    core::RunRecord run = core::execute_run(system, src, s0, k, run_seed);
    if (run.hit_failure) return Falsified{std::move(run), i, "failure"};
    for (const auto& s : run.states) {
      if (!cover_contains(candidate, s)) return Falsified{std::move(run), i, "escape"};
    }
  }

  SafeSetCertificate cert;
  cert.cover = candidate;
  cert.spec = spec;
  cert.actor_label = actor.label;
  cert.system_label = system.label();
  cert.mode = actor.controlled() ? "controlled" : "policy";
  cert.runs_used = n;
  cert.seed = seed;
  return cert;
}

}  // namespace safeset::stats
