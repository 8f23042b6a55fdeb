#include "safeset/core.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace safeset::core {

bool SpaceSpec::contains(const StateVector& s) const {
  if (s.size() != dims.size()) return false;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (s[i] < dims[i].lo || s[i] > dims[i].hi) return false;
  }
  return true;
}

bool SpaceSpec::in_failure(const StateVector& s) const { return failure && failure(s); }

void SpaceSpec::validate() const {
  for (const auto& d : dims) {
    if (d.kind == DimKind::Continuous) {
      if (!(d.lo < d.hi)) throw std::invalid_argument("dimension '" + d.name + "': need lo < hi");
    } else {
      if (!(d.lo <= d.hi)) throw std::invalid_argument("dimension '" + d.name + "': need lo <= hi");
      if (d.lo != std::floor(d.lo) || d.hi != std::floor(d.hi))
        throw std::invalid_argument("dimension '" + d.name + "': integer bounds must be integral");
    }
  }
}

RunRecord execute_run(SystemModel& sys, const ActionSource& src, const StateVector& s0, int k,
                      std::uint64_t seed) {
  const SpaceSpec& space = sys.space();
  if (k < 1) throw std::invalid_argument("execute_run: k must be >= 1");
  if (space.in_failure(s0)) throw std::invalid_argument("execute_run: s0 is in the unsafe region");
  if (!space.contains(s0)) throw std::invalid_argument("execute_run: s0 is outside the state box");
  if (!src.policy && !src.sequence) throw std::invalid_argument("execute_run: no action source");
  if (src.sequence && static_cast<int>(src.sequence->size()) != k)
    throw std::invalid_argument("execute_run: open-loop action sequence length != k");

  RunRecord run;
  run.s0 = s0;
  run.seed = seed;
  run.states.reserve(k);
  run.actions.reserve(k);

  sys.reset(s0, seed);
  if (src.policy) src.policy->on_reset();

  StateVector recorded = s0;
  for (int t = 1; t <= k; ++t) {
    ActionVector u = src.policy ? src.policy->act(sys, recorded) : (*src.sequence)[t - 1];
    sys.step(u);
    StateVector raw = sys.observed();

    if (run.hit_failure) {
      // absorb: the first failure state repeats to the end of the record
    } else if (space.in_failure(raw)) {
      run.hit_failure = true;
      run.failure_index = t;
      recorded = raw;
    } else if (space.contains(raw)) {
      recorded = raw;
    } else {
      run.left_oss_steps.push_back(t);  // freeze: repeat the last in-box state
    }
    run.states.push_back(recorded);
    run.actions.push_back(std::move(u));
  }
  run.ended_frozen = !run.left_oss_steps.empty() && run.left_oss_steps.back() == k;
  return run;
}

CostValue failure_cost(const RunRecord& run) { return run.hit_failure ? "1" : "0"; }

namespace {

void encode_vector(std::string& out, const std::vector<double>& v) {
  for (double x : v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
    out.append(reinterpret_cast<const char*>(&bits), sizeof(bits));
  }
  out.push_back('|');
}

}  // namespace

std::string run_signature(const RunRecord& run, const CostValue& cost) {
  std::string out;
  out.reserve((run.states.size() + run.actions.size() + 1) * 8 * 4 + cost.size() + 16);
  encode_vector(out, run.s0);
  for (const auto& s : run.states) encode_vector(out, s);
  out.push_back('/');
  for (const auto& a : run.actions) encode_vector(out, a);
  out.push_back('/');
  out += cost;
  return out;
}

AlgorithmRunResult run_algorithm(const AlgorithmSpec& spec, SystemModel& system, int max_runs,
                                 std::uint64_t seed) {
  if (max_runs < 1) throw std::invalid_argument("run_algorithm: max_runs must be >= 1");
  if (!spec.sample_s0) throw std::invalid_argument("run_algorithm: missing initial-state sampler");
  if (!spec.cost || !spec.termination)
    throw std::invalid_argument("run_algorithm: missing cost or termination rule");
  if (spec.kind == AlgorithmKind::OpenLoop && !spec.sample_actions)
    throw std::invalid_argument("run_algorithm: open-loop spec needs an action-sequence sampler");
  if (spec.kind == AlgorithmKind::PolicyDriven && !spec.policy)
    throw std::invalid_argument("run_algorithm: policy-driven spec needs a policy");

  AlgorithmRunResult out;
  Rng sampler(child_seed(seed, 0));
  std::unordered_set<std::string> seen;

  while (!out.terminated && out.attempts < max_runs) {
    std::uint64_t run_seed = child_seed(seed, 1 + out.attempts);
    StateVector s0 = spec.sample_s0(sampler);

    ActionSource src;
    std::vector<ActionVector> seq;
    if (spec.kind == AlgorithmKind::OpenLoop) {
      seq = spec.sample_actions(sampler);
      src.sequence = &seq;
    } else {
      src.policy = spec.policy;
    }

    RunRecord run = execute_run(system, src, s0, spec.k, run_seed);
    ++out.attempts;

    CostValue g = spec.cost(run);
    if (!seen.insert(run_signature(run, g)).second) continue;  // distinct-sample rule

    out.costs.push_back(g);
    out.runs.push_back(std::move(run));
    if (spec.termination(out.costs)) out.terminated = true;
  }
  return out;
}

}  // namespace safeset::core
