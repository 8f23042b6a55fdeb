#include <doctest.h>

#include <cmath>
#include <variant>
#include <vector>

#include "safeset/covering.hpp"
#include "safeset/stats.hpp"
#include "safeset/toys.hpp"

namespace core = safeset::core;
namespace cover = safeset::cover;
namespace stats = safeset::stats;
namespace toys = safeset::toys;
using core::DimKind;
using core::SpaceSpec;
using core::StateVector;
using safeset::Rng;
using stats::ConfidenceSpec;

namespace {

SpaceSpec line(double lo, double hi) {
  SpaceSpec s;
  s.name = "line";
  s.dims = {{"s", "", DimKind::Continuous, lo, hi}};
  return s;
}

}  // namespace

TEST_CASE("required sample counts match the closed-form table") {
  CHECK(stats::min_samples(0.1, 1e-4) == 88);
  CHECK(stats::min_samples(0.01, 1e-4) == 917);
  CHECK(stats::min_samples(0.001, 1e-4) == 9206);
  CHECK(stats::min_samples(0.5, 0.5) == 1);
}

TEST_CASE("invalid confidence parameters are rejected") {
  CHECK_THROWS_AS(stats::min_samples(0.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(stats::min_samples(1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(stats::min_samples(0.5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(stats::min_samples(0.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(stats::epsilon_from_samples(0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(stats::epsilon_from_samples(10, 0.0), std::invalid_argument);
}

TEST_CASE("certified escape level from a run count inverts the sample bound") {
  CHECK(std::abs(stats::epsilon_from_samples(917, 1e-4) - 0.009994) < 1e-6);
  CHECK(stats::epsilon_from_samples(1, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("the sample count is the tightest integer satisfying the tail bound") {
  for (double eps : {0.001, 0.01, 0.05, 0.1, 0.3, 0.5, 0.9}) {
    for (double beta : {1e-6, 1e-4, 0.01, 0.1, 0.5}) {
      int n = stats::min_samples(eps, beta);
      double lq = std::log1p(-eps);
      double lb = std::log(beta);
      CHECK(static_cast<double>(n) * lq <= lb);
      if (n > 1) CHECK(static_cast<double>(n - 1) * lq > lb);
      CHECK(std::pow(1.0 - eps, n) <= beta * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("run count and escape level round-trip across the whole practical range") {
  const double beta = 1e-4;
  for (int m = 1; m <= 10000; ++m) {
    double e = stats::epsilon_from_samples(m, beta);
    CHECK(stats::min_samples(e, beta) <= m);
    CHECK(m <= stats::min_samples(e * (1.0 - 1e-12), beta));
  }
}

TEST_CASE("action draws respect the box and integer dimensions") {
  SpaceSpec box;
  box.dims = {{"a", "", DimKind::Continuous, -6.0, 3.0},
              {"lane", "", DimKind::Integer, 0.0, 2.0}};
  Rng rng(11);
  bool saw[3] = {false, false, false};
  for (int i = 0; i < 300; ++i) {
    core::ActionVector u = stats::sample_action(box, rng);
    REQUIRE(u.size() == 2);
    CHECK(u[0] >= -6.0);
    CHECK(u[0] <= 3.0);
    CHECK(u[1] == std::floor(u[1]));
    REQUIRE(u[1] >= 0.0);
    REQUIRE(u[1] <= 2.0);
    saw[static_cast<int>(u[1])] = true;
  }
  CHECK(saw[0]);
  CHECK(saw[1]);
  CHECK(saw[2]);
}

TEST_CASE("a fixed-point system certifies its full covering") {
  auto sys = toys::make_identity_toy(0.0, 10.0);
  cover::CoveringSet cand = cover::build_covering(line(0.0, 10.0), {0.5});
  toys::ConstantPolicy pol({0.0});
  stats::ActorSpec actor;
  actor.policy = &pol;
  actor.label = "hold";

  ConfidenceSpec spec{0.1, 0.01};
  auto res = stats::validate_safe_set(cand, actor, *sys, spec, 5, 99);
  REQUIRE(stats::certified(res));
  const auto& cert = std::get<stats::SafeSetCertificate>(res);
  CHECK(cert.runs_used == stats::min_samples(0.1, 0.01));
  CHECK(cert.mode == "policy");
  CHECK(cert.actor_label == "hold");
  CHECK(cert.system_label == sys->label());
  CHECK(cert.seed == 99);
  CHECK(cert.cover.size() == cand.size());
}

TEST_CASE("a draining system falsifies an upper-interval candidate on the first run") {
  // Every state slides down by one per step; the candidate only covers
  // [5,10], so the very first trajectory steps below it.
  auto sys = toys::make_drift_toy(0.0, 10.0, -100.0, 100.0);
  cover::CoveringSet cand = cover::build_covering(line(5.0, 10.0), {0.5});
  toys::ConstantPolicy pol({0.0});
  stats::ActorSpec actor;
  actor.policy = &pol;
  actor.label = "hold";

  auto res = stats::validate_safe_set(cand, actor, *sys, {0.1, 0.01}, 4, 1);
  REQUIRE_FALSE(stats::certified(res));
  const auto& f = std::get<stats::Falsified>(res);
  CHECK(f.run_index == 0);  // every run violates, so the first one reports
  CHECK(f.reason == "escape");
  CHECK_FALSE(f.run.hit_failure);
}

TEST_CASE("a failing trajectory reports the failure, not the escape") {
  auto sys = toys::make_drift_toy(0.0, 10.0, 4.0, 100.0);  // unsafe below 4
  cover::CoveringSet cand = cover::build_covering(line(5.0, 10.0), {0.5});
  toys::ConstantPolicy pol({0.0});
  stats::ActorSpec actor;
  actor.policy = &pol;

  auto res = stats::validate_safe_set(cand, actor, *sys, {0.1, 0.01}, 10, 1);
  REQUIRE_FALSE(stats::certified(res));
  const auto& f = std::get<stats::Falsified>(res);
  CHECK(f.run_index == 0);
  CHECK(f.reason == "failure");
  CHECK(f.run.hit_failure);
}

TEST_CASE("an admissible-action run holds one drawn action for the whole horizon") {
  auto sys = toys::make_shift_toy(0.0, 100.0, 1000.0);
  cover::CoveringSet cand = cover::build_covering(line(40.0, 60.0), {10.0});
  REQUIRE(cand.size() == 1);
  REQUIRE(cand.centroids[0] == StateVector{50.0});

  SpaceSpec action_box;
  action_box.dims = {{"u", "", DimKind::Continuous, 5.0, 10.0}};
  stats::ActorSpec actor;
  actor.action_box = &action_box;
  actor.label = "push";
  REQUIRE(actor.controlled());

  auto res = stats::validate_safe_set(cand, actor, *sys, {0.1, 0.01}, 2, 8);
  REQUIRE_FALSE(stats::certified(res));
  const auto& f = std::get<stats::Falsified>(res);
  CHECK(f.reason == "escape");
  REQUIRE(f.run.actions.size() == 2);
  CHECK(f.run.actions[0] == f.run.actions[1]);
  CHECK(f.run.actions[0][0] >= 5.0);
  CHECK(f.run.actions[0][0] <= 10.0);
  // Two pushes of at least 5 land at 60 or beyond, outside the single cell.
  CHECK(f.run.states[1][0] > 60.0);
}

TEST_CASE("falsification frequency tracks the per-run violation probability") {
  // One-step system that fails with probability p per step, independent of
  // the state. Across many validations the falsification rate must match
  // 1 - (1-p)^N within 3 standard errors.
  const double p = 0.02;
  SpaceSpec space = line(0.0, 1.0);
  space.failure = [](const StateVector& s) { return s[0] < 0.0; };
  toys::PureSystem sys(
      space,
      [p](const StateVector& s, const core::ActionVector&, Rng& rng) {
        return rng.next_double() < p ? StateVector{-1.0} : s;
      },
      "bernoulli-fault");

  cover::CoveringSet cand = cover::build_covering(line(0.0, 1.0), {0.5});
  toys::ConstantPolicy pol({0.0});
  stats::ActorSpec actor;
  actor.policy = &pol;

  ConfidenceSpec spec{0.1, 0.1};
  const int n_runs = stats::min_samples(0.1, 0.1);
  const int reps = 1000;
  int falsified = 0;
  for (int rep = 0; rep < reps; ++rep) {
    auto res = stats::validate_safe_set(cand, actor, sys, spec, 1,
                                        safeset::child_seed(0xABCD, rep));
    if (!stats::certified(res)) ++falsified;
  }
  double expected = 1.0 - std::pow(1.0 - p, n_runs);
  double sigma = std::sqrt(expected * (1.0 - expected) / reps);
  CHECK(std::abs(static_cast<double>(falsified) / reps - expected) < 3.0 * sigma);
}

TEST_CASE("initial-state weighting steers which centroids get exercised") {
  // Stepping drops the state by 60: runs from the low centroid fail, runs
  // from the high centroid stay inside the cover.
  SpaceSpec space = line(0.0, 100.0);
  space.failure = [](const StateVector& s) { return s[0] < 0.0; };
  toys::PureSystem sys(
      space,
      [](const StateVector& s, const core::ActionVector&, Rng&) {
        return StateVector{s[0] - 60.0};
      },
      "plunge");

  cover::CoveringSet cand = cover::build_covering(line(0.0, 100.0), {25.0});
  REQUIRE(cand.centroids == std::vector<StateVector>{{25.0}, {75.0}});
  toys::ConstantPolicy pol({0.0});
  stats::ActorSpec actor;
  actor.policy = &pol;

  stats::MassFunction high_only = [](const StateVector& s) { return s[0] > 50.0 ? 1.0 : 0.0; };
  auto res_high = stats::validate_safe_set(cand, actor, sys, {0.1, 0.01}, 1, 3, high_only);
  CHECK(stats::certified(res_high));

  stats::MassFunction low_only = [](const StateVector& s) { return s[0] < 50.0 ? 1.0 : 0.0; };
  auto res_low = stats::validate_safe_set(cand, actor, sys, {0.1, 0.01}, 1, 3, low_only);
  REQUIRE_FALSE(stats::certified(res_low));
  CHECK(std::get<stats::Falsified>(res_low).run_index == 0);
  CHECK(std::get<stats::Falsified>(res_low).reason == "failure");
}

TEST_CASE("validation rejects malformed candidates and actors") {
  auto sys = toys::make_identity_toy(0.0, 10.0);
  toys::ConstantPolicy pol({0.0});
  stats::ActorSpec actor;
  actor.policy = &pol;

  cover::CoveringSet empty = cover::build_covering(line(0.0, 10.0), {0.5});
  while (!empty.empty()) empty.prune_at(0);
  CHECK_THROWS_AS(stats::validate_safe_set(empty, actor, *sys, {0.1, 0.1}, 1, 0),
                  std::invalid_argument);

  auto unsafe_sys = toys::make_identity_toy(
      0.0, 10.0, [](const StateVector& s) { return s[0] < 2.0; });
  cover::CoveringSet cand = cover::build_covering(line(0.0, 10.0), {0.5});
  CHECK_THROWS_AS(stats::validate_safe_set(cand, actor, *unsafe_sys, {0.1, 0.1}, 1, 0),
                  std::invalid_argument);

  stats::ActorSpec no_source;
  CHECK_THROWS_AS(stats::validate_safe_set(cand, no_source, *sys, {0.1, 0.1}, 1, 0),
                  std::invalid_argument);

  stats::MassFunction negative = [](const StateVector&) { return -1.0; };
  CHECK_THROWS_AS(stats::validate_safe_set(cand, actor, *sys, {0.1, 0.1}, 1, 0, negative),
                  std::invalid_argument);
}
