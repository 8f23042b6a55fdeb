#include "safeset/compare.hpp"

#include <cmath>
#include <stdexcept>

namespace safeset::compare {

using core::StateVector;
using quantify::StateKey;
using quantify::StateKeyHash;
using quantify::StateSet;

namespace {

void check_same_frame(const cover::CoveringSet& a, const cover::CoveringSet& b) {
  if (a.space.dim() != b.space.dim() || a.delta != b.delta)
    throw std::invalid_argument("covering sets live in different spaces or resolutions");
  for (std::size_t d = 0; d < a.space.dim(); ++d) {
    if (a.space.dims[d].lo != b.space.dims[d].lo || a.space.dims[d].hi != b.space.dims[d].hi)
      throw std::invalid_argument("covering sets live over different bounds");
  }
}

StateSet key_set(const cover::CoveringSet& c) {
  StateSet s;
  for (const auto& x : c.centroids) s.insert(StateKey(x));
  return s;
}

}  // namespace

double iou(const cover::CoveringSet& a, const cover::CoveringSet& b) {
  check_same_frame(a, b);
  StateSet bk = key_set(b);
  std::size_t inter = 0;
  for (const auto& x : a.centroids)
    if (bk.contains(StateKey(x))) ++inter;
  std::size_t uni = a.size() + b.size() - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double diff_fraction(const cover::CoveringSet& a, const cover::CoveringSet& b,
                     const cover::CoveringSet& o_cover) {
  check_same_frame(a, b);
  check_same_frame(a, o_cover);
  if (o_cover.empty()) throw std::invalid_argument("diff_fraction: empty reference cover");
  StateSet bk = key_set(b);
  std::size_t diff = 0;
  for (const auto& x : a.centroids)
    if (!bk.contains(StateKey(x))) ++diff;
  return static_cast<double>(diff) / static_cast<double>(o_cover.size());
}

AggOrder aggressiveness_order(const cover::CoveringSet& phi1, const cover::CoveringSet& phi2) {
  check_same_frame(phi1, phi2);
  StateSet k1 = key_set(phi1);
  StateSet k2 = key_set(phi2);
  bool one_minus_two = false, two_minus_one = false;
  for (const auto& x : phi1.centroids)
    if (!k2.contains(StateKey(x))) {
      one_minus_two = true;
      break;
    }
  for (const auto& x : phi2.centroids)
    if (!k1.contains(StateKey(x))) {
      two_minus_one = true;
      break;
    }
  if (!one_minus_two && !two_minus_one) return AggOrder::Equal;
  if (!one_minus_two) return AggOrder::More;  // phi1 strictly inside phi2
  if (!two_minus_one) return AggOrder::Less;
  return AggOrder::Incomparable;
}

double mass_ratio(const cover::CoveringSet& phi_prime, const cover::CoveringSet& phi,
                  const stats::MassFunction& p) {
  check_same_frame(phi_prime, phi);
  StateSet prime = key_set(phi_prime);
  for (const auto& x : phi.centroids) {
    if (!prime.contains(StateKey(x)))
      throw std::invalid_argument("mass_ratio: phi is not contained in phi_prime");
  }
  StateSet base = key_set(phi);
  double extra = 0.0, total = 0.0;
  for (const auto& x : phi_prime.centroids) {
    double w = p ? p(x) : 1.0;
    if (w < 0.0) throw std::invalid_argument("mass_ratio: negative weight");
    total += w;
    if (!base.contains(StateKey(x))) extra += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("mass_ratio: zero total mass");
  return extra / total;
}

AggressivenessVerdict compare_algorithms(const TestingAlgorithm& te1, const TestingAlgorithm& te2,
                                         const core::SpaceSpec& oss, core::SystemModel& system,
                                         const CompareParams& params,
                                         const quantify::QuantifyResult* phi1_precomputed) {
  AggressivenessVerdict v;

  quantify::QuantifyResult own;
  const quantify::QuantifyResult* q1 = phi1_precomputed;
  if (!q1) {
    quantify::QuantifyParams qp;
    qp.spec = params.spec;
    qp.delta = params.delta;
    qp.k = params.k;
    qp.max_runs = params.max_runs;
    qp.seed = child_seed(params.seed, 101);
    qp.keep_log = false;
    own = quantify::quantify(oss, system, te1.actor, qp);
    q1 = &own;
  }
  if (!q1->valid) throw std::runtime_error("compare_algorithms: te1 quantification did not converge");

  v.phi1 = q1->cover;
  v.phi2 = q1->cover;  // shadow cover starts as a copy

  // An empty safe set is trivially contained in anything te2 induces.
  if (v.phi1.empty()) {
    v.agg = true;
    v.outcome = CompareOutcome::Contained;
    return v;
  }

  const int n_required = stats::min_samples(params.spec.epsilon, params.spec.beta);
  StateSet phi1_keys = key_set(v.phi1);
  std::vector<StateVector> grown;  // off-grid shadow centroids, in discovery order

  auto in_shadow = [&](const StateVector& s) {
    if (cover::cover_contains(v.phi1, s)) return true;
    for (const auto& g : grown) {
      if (cover::neighborhood_contains(g, v.phi1.delta, s)) return true;
    }
    return false;
  };

  Rng sampler(child_seed(params.seed, 0));
  auto draw_s0 = [&]() -> const StateVector& {
    const auto& cs = v.phi1.centroids;
    if (!params.p) return cs[sampler.next_below(cs.size())];
    double total = 0.0;
    std::vector<double> cum(cs.size());
    for (std::size_t i = 0; i < cs.size(); ++i) {
      double w = params.p(cs[i]);
      if (w < 0.0) throw std::invalid_argument("compare_algorithms: negative weight");
      total += w;
      cum[i] = total;
    }
    if (!(total > 0.0)) throw std::invalid_argument("compare_algorithms: zero mass over phi1");
    double x = sampler.next_double() * total;
    for (std::size_t i = 0; i < cs.size(); ++i)
      if (x < cum[i]) return cs[i];
    return cs.back();
  };

  auto finish_shadow = [&]() {
    for (const auto& g : grown) v.phi2.grow(g);
    v.grown_centroids = static_cast<int>(grown.size());
    v.escape_mass_ratio = mass_ratio(v.phi2, v.phi1, params.p);
  };

  for (int i = 0; i < n_required; ++i) {
    const StateVector& s0 = draw_s0();
    std::uint64_t run_seed = child_seed(params.seed, 1 + static_cast<std::uint64_t>(i));

    core::ActionSource src;
    std::vector<core::ActionVector> seq;
    if (te2.actor.controlled()) {
      Rng action_rng(child_seed(run_seed, 0x5eed));
      seq.assign(static_cast<std::size_t>(params.k),
                 stats::sample_action(*te2.actor.action_box, action_rng));
      src.sequence = &seq;
    } else {
      src.policy = te2.actor.policy;
    }

    core::RunRecord run = core::execute_run(system, src, s0, params.k, run_seed);
    ++v.runs_used;

    if (run.hit_failure) {
      finish_shadow();
      v.agg = false;
      v.outcome = CompareOutcome::FalsifiedByTe2;
      return v;
    }
    for (const auto& s : run.states) {
      if (!in_shadow(s)) grown.push_back(s);
    }
  }

  finish_shadow();
  if (v.escape_mass_ratio < params.spec.epsilon) {
    v.agg = true;
    v.outcome =
        grown.empty() ? CompareOutcome::Contained : CompareOutcome::ContainedSmallEscape;
    return v;
  }

  // Escape mass too large: fall back to quantifying te2 outright.
  quantify::QuantifyParams qp2;
  qp2.spec = params.spec;
  qp2.delta = params.delta;
  qp2.k = params.k;
  qp2.max_runs = params.max_runs;
  qp2.seed = child_seed(params.seed, 202);
  qp2.keep_log = false;
  quantify::QuantifyResult q2 = quantify::quantify(oss, system, te2.actor, qp2);
  if (!q2.valid) throw std::runtime_error("compare_algorithms: te2 quantification did not converge");
  v.te2_quantify_runs = q2.runs_total;
  v.phi2 = q2.cover;
  v.outcome = CompareOutcome::FullQuantification;

  StateSet k2 = key_set(q2.cover);
  v.agg = true;
  for (const auto& x : v.phi1.centroids) {
    if (!k2.contains(StateKey(x))) {
      v.agg = false;
      break;
    }
  }
  return v;
}

}  // namespace safeset::compare
