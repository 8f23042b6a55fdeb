#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "safeset/compare.hpp"
#include "safeset/toys.hpp"

namespace core = safeset::core;
namespace cover = safeset::cover;
namespace stats = safeset::stats;
namespace toys = safeset::toys;
namespace quantify = safeset::quantify;
namespace compare = safeset::compare;
using compare::AggOrder;
using compare::CompareOutcome;
using compare::CompareParams;
using compare::TestingAlgorithm;
using core::DimKind;
using core::SpaceSpec;
using core::StateVector;
using safeset::Rng;

namespace {

SpaceSpec line(double lo, double hi) {
  SpaceSpec s;
  s.name = "line";
  s.dims = {{"s", "", DimKind::Continuous, lo, hi}};
  return s;
}

SpaceSpec headway_box() {
  SpaceSpec s;
  s.name = "headway";
  s.dims = {{"d_x", "m", DimKind::Continuous, 0.0, 50.0},
            {"d_y", "m", DimKind::Continuous, -3.7, 3.7},
            {"v_0", "m/s", DimKind::Continuous, 0.0, 25.0},
            {"v_1", "m/s", DimKind::Continuous, 0.0, 25.0}};
  return s;
}

// Copy of `full` keeping only the centroids whose first coordinate is in
// `keep` (1-D) — or, via the index overload, the given centroid positions.
cover::CoveringSet keep_values(const cover::CoveringSet& full, const std::set<double>& keep) {
  cover::CoveringSet c = full;
  for (std::size_t i = c.size(); i-- > 0;) {
    if (!keep.contains(c.centroids[i][0])) c.prune_at(i);
  }
  return c;
}

quantify::QuantifyResult as_precomputed(cover::CoveringSet c) {
  quantify::QuantifyResult r;
  r.cover = std::move(c);
  r.valid = true;
  return r;
}

std::set<double> centroid_values(const cover::CoveringSet& c) {
  std::set<double> out;
  for (const auto& s : c.centroids) out.insert(s[0]);
  return out;
}

// The outcome classes promise specific escape-mass facts; check them all.
void check_consistent(const compare::AggressivenessVerdict& v, double epsilon) {
  switch (v.outcome) {
    case CompareOutcome::Contained:
      CHECK(v.escape_mass_ratio == 0.0);
      CHECK(v.grown_centroids == 0);
      break;
    case CompareOutcome::ContainedSmallEscape:
      CHECK(v.escape_mass_ratio > 0.0);
      CHECK(v.escape_mass_ratio < epsilon);
      CHECK(v.grown_centroids > 0);
      break;
    case CompareOutcome::FullQuantification:
      CHECK(v.escape_mass_ratio >= epsilon);
      CHECK(v.te2_quantify_runs > 0);
      break;
    case CompareOutcome::FalsifiedByTe2:
      CHECK_FALSE(v.agg);
      break;
  }
}

}  // namespace

TEST_CASE("intersection-over-union handles empty, identical, and partial overlaps") {
  cover::CoveringSet full = cover::build_covering(line(0.0, 10.0), {0.5});
  REQUIRE(full.size() == 10);

  cover::CoveringSet empty_a = keep_values(full, {});
  cover::CoveringSet empty_b = keep_values(full, {});
  CHECK(compare::iou(empty_a, empty_b) == 1.0);
  CHECK(compare::iou(full, full) == 1.0);

  cover::CoveringSet low = keep_values(full, {0.5, 1.5, 2.5, 3.5, 4.5});
  cover::CoveringSet high = keep_values(full, {5.5, 6.5, 7.5, 8.5, 9.5});
  CHECK(compare::iou(low, high) == 0.0);
  CHECK(compare::iou(full, low) == doctest::Approx(0.5));

  cover::CoveringSet other_res = cover::build_covering(line(0.0, 10.0), {1.0});
  CHECK_THROWS_AS(compare::iou(full, other_res), std::invalid_argument);
}

TEST_CASE("set-difference fraction is measured against the reference covering") {
  cover::CoveringSet full = cover::build_covering(headway_box(), {5.0, 3.7, 5.0, 5.0});
  REQUIRE(full.size() == 45);

  cover::CoveringSet minus3 = full;
  minus3.prune_at(0);
  minus3.prune_at(0);
  minus3.prune_at(0);
  CHECK(compare::diff_fraction(full, minus3, full) == doctest::Approx(3.0 / 45.0));
  CHECK(std::abs(compare::diff_fraction(full, minus3, full) - 0.0667) < 1e-3);
  CHECK(compare::diff_fraction(minus3, full, full) == 0.0);

  cover::CoveringSet empty_ref = minus3;
  while (!empty_ref.empty()) empty_ref.prune_at(0);
  CHECK_THROWS_AS(compare::diff_fraction(full, minus3, empty_ref), std::invalid_argument);
}

TEST_CASE("the aggressiveness order reflects strict set containment") {
  cover::CoveringSet full = cover::build_covering(line(0.0, 10.0), {0.5});
  cover::CoveringSet small = keep_values(full, {0.5, 1.5});
  cover::CoveringSet mid = keep_values(full, {0.5, 1.5, 2.5});
  cover::CoveringSet other = keep_values(full, {7.5, 8.5});

  CHECK(compare::aggressiveness_order(small, small) == AggOrder::Equal);
  // A tester whose surviving safe set is strictly smaller found more ways
  // to fail, i.e. tested more aggressively.
  CHECK(compare::aggressiveness_order(small, mid) == AggOrder::More);
  CHECK(compare::aggressiveness_order(mid, small) == AggOrder::Less);
  CHECK(compare::aggressiveness_order(small, other) == AggOrder::Incomparable);
}

TEST_CASE("the aggressiveness order composes transitively") {
  cover::CoveringSet full = cover::build_covering(line(0.0, 10.0), {0.5});
  Rng rng(808);
  auto random_subset = [&]() {
    std::set<double> keep;
    for (const auto& c : full.centroids)
      if (rng.next_below(2) == 0) keep.insert(c[0]);
    return keep_values(full, keep);
  };
  auto at_least = [](AggOrder o) { return o == AggOrder::More || o == AggOrder::Equal; };

  int antecedent_hits = 0;
  for (int trial = 0; trial < 300; ++trial) {
    cover::CoveringSet a = random_subset();
    cover::CoveringSet b = random_subset();
    cover::CoveringSet c = random_subset();
    if (at_least(compare::aggressiveness_order(a, b)) &&
        at_least(compare::aggressiveness_order(b, c))) {
      ++antecedent_hits;
      CHECK(at_least(compare::aggressiveness_order(a, c)));
    }
  }
  CHECK(antecedent_hits > 10);  // the property must actually get exercised
}

TEST_CASE("escape mass is the weighted fraction of grown centroids") {
  cover::CoveringSet full = cover::build_covering(line(0.0, 10.0), {0.5});
  cover::CoveringSet base = keep_values(full, {0.5, 1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5, 8.5});
  REQUIRE(base.size() == 9);

  CHECK(compare::mass_ratio(full, base, {}) == doctest::Approx(0.1));
  CHECK(compare::mass_ratio(full, full, {}) == 0.0);

  // Put all the weight on the one extra centroid.
  stats::MassFunction spiked = [](const StateVector& s) { return s[0] == 9.5 ? 1.0 : 0.0; };
  CHECK(compare::mass_ratio(full, base, spiked) == doctest::Approx(1.0));

  CHECK_THROWS_AS(compare::mass_ratio(base, full, {}), std::invalid_argument);
  stats::MassFunction negative = [](const StateVector&) { return -1.0; };
  CHECK_THROWS_AS(compare::mass_ratio(full, base, negative), std::invalid_argument);
  stats::MassFunction zero = [](const StateVector&) { return 0.0; };
  CHECK_THROWS_AS(compare::mass_ratio(full, base, zero), std::invalid_argument);
}

TEST_CASE("comparing an algorithm against itself contains cleanly at the run quota") {
  auto sys = toys::make_identity_toy(0.0, 10.0);
  toys::ConstantPolicy pol({0.0});
  TestingAlgorithm te;
  te.actor.policy = &pol;
  te.actor.label = "hold";

  CompareParams params;
  params.spec = {0.1, 0.01};
  params.delta = {0.5};
  params.k = 3;
  params.seed = 17;

  auto v = compare::compare_algorithms(te, te, sys->space(), *sys, params);
  CHECK(v.agg);
  CHECK(v.outcome == CompareOutcome::Contained);
  CHECK(v.runs_used == stats::min_samples(0.1, 0.01));
  CHECK(v.escape_mass_ratio == 0.0);
  CHECK(v.grown_centroids == 0);
  CHECK(v.te2_quantify_runs == -1);
  CHECK(v.phi1.size() == 10);
  CHECK(v.phi2.size() == 10);
  check_consistent(v, params.spec.epsilon);
}

TEST_CASE("a harsher challenger falsifies the first tester's safe set") {
  // Holding still keeps every state safe, so the first tester certifies the
  // full grid; pushing by 2 drives the upper half into the fault within
  // three steps, which the validation phase must catch.
  auto sys = toys::make_shift_toy(0.0, 10.0, 10.5);
  toys::ConstantPolicy hold({0.0});
  toys::ConstantPolicy push({2.0});
  TestingAlgorithm te1, te2;
  te1.actor.policy = &hold;
  te1.actor.label = "hold";
  te2.actor.policy = &push;
  te2.actor.label = "push";

  CompareParams params;
  params.spec = {0.1, 0.01};
  params.delta = {0.5};
  params.k = 3;
  params.seed = 6;

  auto v = compare::compare_algorithms(te1, te2, sys->space(), *sys, params);
  CHECK_FALSE(v.agg);
  CHECK(v.outcome == CompareOutcome::FalsifiedByTe2);
  CHECK(v.phi1.size() == 10);
  CHECK(v.runs_used >= 1);
  CHECK(v.runs_used <= stats::min_samples(0.1, 0.01));
  check_consistent(v, params.spec.epsilon);
}

TEST_CASE("small excursions below the escape budget still confirm aggressiveness") {
  auto sys = toys::make_shift_toy(0.0, 20.0, 1000.0);
  cover::CoveringSet full = cover::build_covering(line(0.0, 20.0), {0.5});
  REQUIRE(full.size() == 20);
  std::set<double> keep;
  for (const auto& c : full.centroids)
    if (c[0] <= 13.5) keep.insert(c[0]);
  quantify::QuantifyResult phi1 = as_precomputed(keep_values(full, keep));
  REQUIRE(phi1.cover.size() == 14);

  toys::ConstantPolicy hold({0.0});
  // Nudges states at the top edge of the first tester's set slightly past
  // it; everything else holds still.
  toys::LambdaPolicy nudge(
      [](const StateVector& s) {
        return core::ActionVector{s[0] >= 13.0 ? 0.6 : 0.0};
      },
      "edge-nudge");
  TestingAlgorithm te1, te2;
  te1.actor.policy = &hold;
  te2.actor.policy = &nudge;

  CompareParams params;
  params.spec = {0.2, 1e-4};
  params.delta = {0.5};
  params.k = 3;
  params.seed = 3;

  auto v = compare::compare_algorithms(te1, te2, sys->space(), *sys, params, &phi1);
  CHECK(v.agg);
  CHECK(v.outcome == CompareOutcome::ContainedSmallEscape);
  CHECK(v.runs_used == stats::min_samples(0.2, 1e-4));
  CHECK(v.grown_centroids == 3);  // 14.1, 14.7, 15.3 from the 13.5 starts
  CHECK(v.escape_mass_ratio == doctest::Approx(3.0 / 17.0));
  CHECK(v.phi2.size() == 17);
  check_consistent(v, params.spec.epsilon);
}

TEST_CASE("large escape mass triggers a full challenger quantification that may confirm") {
  auto sys = toys::make_shift_toy(0.0, 20.0, 1000.0);
  cover::CoveringSet full = cover::build_covering(line(0.0, 20.0), {0.5});
  quantify::QuantifyResult phi1 = as_precomputed(keep_values(full, {0.5, 1.5}));

  toys::ConstantPolicy hold({0.0});
  toys::ConstantPolicy push({2.0});
  TestingAlgorithm te1, te2;
  te1.actor.policy = &hold;
  te2.actor.policy = &push;

  CompareParams params;
  params.spec = {0.2, 1e-4};
  params.delta = {0.5};
  params.k = 3;
  params.seed = 11;

  auto v = compare::compare_algorithms(te1, te2, sys->space(), *sys, params, &phi1);
  CHECK(v.outcome == CompareOutcome::FullQuantification);
  // The challenger never faults anywhere, so its own quantified set is the
  // full grid, a superset of the tiny first set: aggressiveness confirmed.
  CHECK(v.agg);
  CHECK(v.phi2.size() == 20);
  CHECK(v.te2_quantify_runs >= stats::min_samples(0.2, 1e-4));
  check_consistent(v, params.spec.epsilon);
}

TEST_CASE("full challenger quantification can also refute aggressiveness") {
  // The challenger is gentle on the first tester's only centroid for the
  // whole horizon, but its own quantification condemns that centroid
  // through an escape chain: a state visited from 0.5 later shows up on a
  // failure prefix started elsewhere.
  auto sys = toys::make_shift_toy(0.0, 20.0, 20.5);
  cover::CoveringSet full = cover::build_covering(line(0.0, 20.0), {0.5});
  quantify::QuantifyResult phi1 = as_precomputed(keep_values(full, {0.5}));

  toys::ConstantPolicy hold({0.0});
  toys::LambdaPolicy weave(
      [](const StateVector& s) {
        double x = s[0];
        double u = 0.0;
        if (x == 0.5) u = 1.0;          // -> 1.5
        else if (x == 1.5) u = 1.375;   // -> 2.875
        else if (x == 2.875) u = 1.375; // -> 4.25
        else if (x == 4.25) u = 17.0;   // -> 21.25, fault
        else if (x == 4.5) u = 0.25;    // -> 4.75
        else if (x == 4.75) u = 17.25;  // -> 22.0, fault
        else if (x == 5.5) u = -1.25;   // -> 4.25
        else if (x == 2.5) u = 15.0;    // -> 17.5
        else if (x == 17.5) u = 5.0;    // -> 22.5, fault
        return core::ActionVector{u};
      },
      "weave");
  TestingAlgorithm te1, te2;
  te1.actor.policy = &hold;
  te2.actor.policy = &weave;

  CompareParams params;
  params.spec = {0.2, 1e-4};
  params.delta = {0.5};
  params.k = 3;
  params.seed = 1;

  auto v = compare::compare_algorithms(te1, te2, sys->space(), *sys, params, &phi1);
  CHECK(v.outcome == CompareOutcome::FullQuantification);
  CHECK_FALSE(v.agg);
  CHECK_FALSE(centroid_values(v.phi2).contains(0.5));
  check_consistent(v, params.spec.epsilon);
}

TEST_CASE("a comparison resolved by containment costs fewer runs than quantifying the challenger") {
  // Identical testers: quiet below 4, fatal push above. The first
  // quantification leaves the low shelf; validating the challenger on that
  // shelf stays clean and stops at the quota, while quantifying the
  // challenger from scratch must also pay for discovering the fatal cells.
  auto sys = toys::make_shift_toy(0.0, 10.0, 10.5);
  toys::LambdaPolicy pol(
      [](const StateVector& s) {
        return core::ActionVector{s[0] < 4.0 ? 0.0 : 7.0};
      },
      "shelf-push");
  TestingAlgorithm te;
  te.actor.policy = &pol;

  CompareParams params;
  params.spec = {0.1, 1e-4};
  params.delta = {0.5};
  params.k = 3;
  params.seed = 14;

  auto v = compare::compare_algorithms(te, te, sys->space(), *sys, params);
  CHECK(v.agg);
  CHECK(v.outcome == CompareOutcome::Contained);
  CHECK(centroid_values(v.phi1) == std::set<double>{0.5, 1.5, 2.5, 3.5});
  CHECK(v.runs_used == stats::min_samples(0.1, 1e-4));
  check_consistent(v, params.spec.epsilon);

  quantify::QuantifyParams qp;
  qp.spec = params.spec;
  qp.delta = params.delta;
  qp.k = params.k;
  qp.seed = safeset::child_seed(params.seed, 202);  // the embedded-quantify convention
  qp.keep_log = false;
  auto q2 = quantify::quantify(sys->space(), *sys, te.actor, qp);
  REQUIRE(q2.valid);
  CHECK(v.runs_used < q2.runs_total);
}

TEST_CASE("a higher failure rate does not by itself order two testers") {
  auto sys = toys::make_shift_toy(0.0, 10.0, 10.5);
  toys::LambdaPolicy low_killer(
      [](const StateVector& s) {
        return core::ActionVector{s[0] < 5.0 ? 11.0 : 0.0};
      },
      "kills-low");
  toys::LambdaPolicy high_killer(
      [](const StateVector& s) {
        return core::ActionVector{s[0] >= 4.0 ? 11.0 : 0.0};
      },
      "kills-high");

  stats::ActorSpec actor_a;
  actor_a.policy = &low_killer;
  stats::ActorSpec actor_b;
  actor_b.policy = &high_killer;

  quantify::QuantifyParams qp;
  qp.spec = {0.1, 0.01};
  qp.delta = {0.5};
  qp.k = 1;
  qp.seed = 19;
  qp.keep_log = false;

  auto qa = quantify::quantify(sys->space(), *sys, actor_a, qp);
  qp.seed = 20;
  auto qb = quantify::quantify(sys->space(), *sys, actor_b, qp);
  REQUIRE(qa.valid);
  REQUIRE(qb.valid);
  CHECK(centroid_values(qa.cover) == std::set<double>{5.5, 6.5, 7.5, 8.5, 9.5});
  CHECK(centroid_values(qb.cover) == std::set<double>{0.5, 1.5, 2.5, 3.5});

  // Per-start failure counts over the whole grid: the second tester kills
  // more starts, yet neither safe set contains the other.
  cover::CoveringSet grid = cover::build_covering(line(0.0, 10.0), {0.5});
  auto failure_count = [&](core::PolicyModel& pol) {
    int fails = 0;
    core::ActionSource src;
    src.policy = &pol;
    for (const auto& c : grid.centroids)
      if (core::execute_run(*sys, src, c, 1, 0).hit_failure) ++fails;
    return fails;
  };
  int fr_a = failure_count(low_killer);
  int fr_b = failure_count(high_killer);
  CHECK(fr_a == 5);
  CHECK(fr_b == 6);
  CHECK(fr_b > fr_a);
  CHECK(compare::aggressiveness_order(qa.cover, qb.cover) == AggOrder::Incomparable);
}

TEST_CASE("an empty first safe set is trivially contained") {
  auto sys = toys::make_identity_toy(0.0, 10.0);
  cover::CoveringSet full = cover::build_covering(line(0.0, 10.0), {0.5});
  quantify::QuantifyResult phi1 = as_precomputed(keep_values(full, {}));

  toys::ConstantPolicy hold({0.0});
  TestingAlgorithm te1, te2;
  te1.actor.policy = &hold;
  te2.actor.policy = &hold;

  CompareParams params;
  params.spec = {0.1, 0.01};
  params.delta = {0.5};
  params.k = 2;
  params.seed = 0;

  auto v = compare::compare_algorithms(te1, te2, sys->space(), *sys, params, &phi1);
  CHECK(v.agg);
  CHECK(v.outcome == CompareOutcome::Contained);
  CHECK(v.runs_used == 0);
  check_consistent(v, params.spec.epsilon);
}

TEST_CASE("a first tester that cannot be quantified aborts the comparison") {
  SpaceSpec space = line(0.0, 1.0);
  space.failure = [](const StateVector& s) { return s[0] < 0.0; };
  toys::PureSystem sys(
      space,
      [](const StateVector& s, const core::ActionVector&, Rng& rng) {
        return rng.next_double() < 0.3 ? StateVector{-1.0} : s;
      },
      "random-fault");
  toys::ConstantPolicy hold({0.0});
  TestingAlgorithm te;
  te.actor.policy = &hold;

  CompareParams params;
  params.spec = {0.1, 1e-4};
  params.delta = {0.005};
  params.k = 1;
  params.max_runs = stats::min_samples(0.1, 1e-4);
  params.seed = 23;

  CHECK_THROWS_AS(compare::compare_algorithms(te, te, space, sys, params), std::runtime_error);
}
