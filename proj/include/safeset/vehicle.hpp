#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "safeset/core.hpp"
#include "safeset/rng.hpp"

namespace safeset::vehicle {

// All testbed constants in one overridable record. Defaults are the values
// every built-in experiment uses.
struct VehicleParams {
  // Road: three parallel lanes, y measured across the road.
  int n_lanes = 3;
  double lane_width = 3.7;
  double lane0_center = 1.85;
  double y_min = 1.0;
  double y_max = 10.1;

  // Car geometry and dynamics.
  double car_length = 5.0;
  double car_width = 2.0;
  double dt = 0.1;
  double a_min = -6.0;
  double a_max = 3.0;
  double v_min = 0.0;
  double v_max = 25.0;
  double lat_omega = 2.0;  // critically damped lane tracking, natural frequency

  // Longitudinal car-following controller.
  double idm_v_des = 25.0;
  double idm_a_max = 3.0;
  double idm_b = 5.0;
  double idm_s0 = 2.0;
  double idm_T = 1.5;
  double follow_lateral_window = 2.85;  // treat the other car as lead iff |dy| is inside

  // Lane-change incentive/safety criterion for the lane-changing subject.
  double mobil_politeness = 0.3;
  double mobil_b_safe = 5.0;
  double mobil_threshold = 0.2;
  double settle_y_tol = 0.2;   // lane decisions only once laterally settled
  double settle_vy_tol = 0.1;

  // Shared gap-acceptance: lane entry is rejected against a nearby car.
  double gap_acceptance = 2.0;

  // Hybrid adversary (regulate, cut in, brake).
  double h_ttc_lo = 0.0;
  double h_ttc_hi = 2.0;
  double h_headway = 1.5;  // regulation target: v1 -> v0 - d_x / h_headway
  double h_kp = 5.0;
  bool h_ttc_uses_dx = true;  // false switches the ratio numerator to d_y

  // Predictive adversary.
  int p_horizon = 10;

  // Observed-state projection.
  double dx_cap = 50.0;

  double lane_center(int lane) const { return lane0_center + lane_width * lane; }
  int nearest_lane(double y) const;
};

struct Car {
  double x = 0.0;   // longitudinal position of the car center, m
  double y = 0.0;   // lateral position of the car center, m
  double v = 0.0;   // longitudinal speed, m/s
  double vy = 0.0;  // lateral rate, m/s
  int lane_cmd = 0;
};

// Two-car world: car 0 is the subject vehicle, car 1 the adversary.
struct VehicleWorld {
  std::array<Car, 2> cars;
  bool collided = false;
  long long step_count = 0;
};

// One 0.1 s step: both cars adopt their commanded lane and acceleration,
// positions advance forward-Euler, lateral motion tracks the commanded lane
// center, and the collision flag latches on body overlap.
void world_step(VehicleWorld& world, const VehicleParams& p, double a0, int lane0, double a1,
                int lane1);

bool bodies_overlap(const VehicleWorld& world, const VehicleParams& p);

// Longitudinal gap between bumpers when the adversary is treated as ahead:
// (x1 - x0) - car_length. Negative once bumpers overlap or the adversary is
// behind.
double bumper_gap(const VehicleWorld& world, const VehicleParams& p);

// Car-following acceleration toward v_des, braking for a lead vehicle at
// `gap` with speed difference dv = v - v_lead. Pass gap <= 0 for a fault
// (maximum braking); pass no lead via idm_free_accel.
double idm_accel(double v, double v_lead, double gap, const VehicleParams& p);
double idm_free_accel(double v, const VehicleParams& p);
double idm_free_accel(double v, double v_des, const VehicleParams& p);

// Lane-change decision for the subject: stay unless one adjacent lane
// passes both the safety criterion (the other car, as the new follower,
// would not need to brake below -b_safe) and the incentive criterion
// (weighted acceleration gain above the threshold), with the gap-acceptance
// veto against entering a lane on top of the other car.
int mobil_decision(const VehicleWorld& world, const VehicleParams& p);

// Subject controllers.
enum class SubjectKind { Follow, LaneChanging, Mixed };

std::string subject_name(SubjectKind kind);
SubjectKind subject_from_name(const std::string& name);

// (a0, lane0) for the subject car given the current world. `kind` must be
// resolved (not Mixed).
std::pair<double, int> subject_act(const VehicleWorld& world, const VehicleParams& p,
                                   SubjectKind kind);

// Shared lane-entry veto for adversary commands: entering a lane the
// subject's body intrudes into is rejected while the bumper distance is
// inside the (speed-adjusted) acceptance gap.
int guard_lane(const VehicleWorld& world, const VehicleParams& p, int desired);

// Two-layer network for the learnt adversary: 4 inputs, tanh hidden layer,
// 4 outputs (desired-speed logit + 3 lateral-mode scores).
struct NetParams {
  int n_in = 4;
  int n_hidden = 32;
  int n_out = 4;
  std::vector<double> w1;  // n_hidden x n_in, row-major
  std::vector<double> b1;  // n_hidden
  std::vector<double> w2;  // n_out x n_hidden, row-major
  std::vector<double> b2;  // n_out

  std::size_t size() const;
  void init_zero();
  void init_random(Rng& rng, double scale);
  std::vector<double> flat() const;
  void set_flat(const std::vector<double>& theta);
  std::vector<double> forward(const std::vector<double>& input) const;
};

void save_net(const NetParams& net, const std::string& path);
NetParams load_net(const std::string& path);

enum class AdversaryKind { Steady, Brake, Hybrid, Predictive, Learnt };

std::string adversary_name(AdversaryKind kind);
AdversaryKind adversary_from_name(const std::string& name);

// (a1, lane1) for the adversary car. All lane commands have already passed
// guard_lane. `net` is only read for the learnt adversary.
std::pair<double, int> adversary_act(AdversaryKind kind, const VehicleWorld& world,
                                     const VehicleParams& p, const NetParams* net);

// Observed-state projection (d_x capped, d_y, v0, v1) and its inverse.
core::StateVector project(const VehicleWorld& world, const VehicleParams& p);

// Place the two cars so that project(world) == s: subject at x = 0 on a
// seed-chosen feasible lane, adversary offset by (d_x + car_length, d_y),
// lateral rates zero, lane commands set to each car's nearest lane. Throws
// std::invalid_argument when no lane keeps both cars on the road.
VehicleWorld lift(const core::StateVector& s, const VehicleParams& p, Rng& rng);

// The observed-state box [0,50] x [-3.7,3.7] x [0,25] x [0,25] with the
// body-overlap failure region d_x in [-2*car_length, 0] and |d_y| <=
// car_width/2 (bodies overlap in both axes).
core::SpaceSpec make_oss(const VehicleParams& p);

// SystemModel adapter: actions are the adversary command [a1, lane1]; the
// subject controller runs inside step().
class VehicleSystem : public core::SystemModel {
 public:
  VehicleSystem(VehicleParams params, SubjectKind subject);

  const core::SpaceSpec& space() const override { return space_; }
  std::string label() const override;
  void reset(const core::StateVector& s0, std::uint64_t seed) override;
  void step(const core::ActionVector& u) override;
  core::StateVector observed() const override;

  const VehicleWorld& world() const { return world_; }
  const VehicleParams& params() const { return params_; }
  SubjectKind active_subject() const { return active_; }

  // The adversary action box: a1 in [a_min, a_max], lane1 integer in
  // [0, n_lanes-1].
  core::SpaceSpec action_box() const;

 private:
  VehicleParams params_;
  SubjectKind subject_;
  SubjectKind active_ = SubjectKind::Follow;
  VehicleWorld world_;
  core::SpaceSpec space_;
};

// PolicyModel adapter around adversary_act; requires the system passed to
// act() to be a VehicleSystem.
class AdversaryPolicy : public core::PolicyModel {
 public:
  AdversaryPolicy(AdversaryKind kind, NetParams net = {});

  std::string label() const override;
  core::ActionVector act(const core::SystemModel& sys, const core::StateVector& recorded) override;

  const NetParams& net() const { return net_; }

 private:
  AdversaryKind kind_;
  NetParams net_;
};

// Evolution-strategy training of the learnt adversary.
struct EsParams {
  int population = 32;  // even: antithetic pairs
  double sigma = 0.1;
  double lr = 0.1;
  int iterations = 200;
  int episodes_per_member = 8;
  int eval_episodes = 32;
  int k = 50;  // steps per episode
};

struct TrainRow {
  int iteration = 0;
  double train_mean = 0.0;
  double eval_mean = 0.0;
  double best_eval = 0.0;
};

struct TrainResult {
  NetParams theta;
  std::vector<TrainRow> curve;
};

// Episode payoff for training: per step -(center distance)/50, +100 with an
// immediate stop on collision.
double episode_reward(const NetParams& net, const VehicleParams& vp, SubjectKind subject, int k,
                      std::uint64_t episode_seed);

// Antithetic evolution-strategy ascent on episode_reward, z-score reward
// normalization, population evaluated concurrently with per-member seeds and
// a fixed-order reduction. Deterministic for a fixed seed. Returns the best
// parameters seen on the fixed evaluation seed set.
TrainResult es_train(const VehicleParams& vp, SubjectKind subject, const EsParams& es,
                     std::uint64_t seed);

void write_curve_csv(const std::vector<TrainRow>& curve, std::ostream& out);

}  // namespace safeset::vehicle
