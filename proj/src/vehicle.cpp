#include "safeset/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace safeset::vehicle {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One forward-Euler car step: derivatives from the pre-step state, speed
// clamped (a stopped car stays stopped under braking), lateral position
// critically damped toward target_y and kept on the road.
void step_single_car(Car& c, const VehicleParams& p, double a, double target_y) {
  a = std::clamp(a, p.a_min, p.a_max);
  const double ay = p.lat_omega * p.lat_omega * (target_y - c.y) - 2.0 * p.lat_omega * c.vy;
  c.x += c.v * p.dt;
  c.v = std::clamp(c.v + a * p.dt, p.v_min, p.v_max);
  c.y += c.vy * p.dt;
  c.vy += ay * p.dt;
  if (c.y < p.y_min) {
    c.y = p.y_min;
    if (c.vy < 0) c.vy = 0;
  }
  if (c.y > p.y_max) {
    c.y = p.y_max;
    if (c.vy > 0) c.vy = 0;
  }
}

// Distance between bumpers regardless of which car is ahead.
double abs_bumper_distance(const VehicleWorld& w, const VehicleParams& p) {
  return std::abs(w.cars[1].x - w.cars[0].x) - p.car_length;
}

// Subject longitudinal control: follow the other car iff it is ahead and
// laterally inside the follow window, free-road tracking otherwise.
double follow_accel(const VehicleWorld& w, const VehicleParams& p) {
  const double gap = bumper_gap(w, p);
  const double dy = w.cars[1].y - w.cars[0].y;
  if (gap > 0 && std::abs(dy) <= p.follow_lateral_window) {
    return idm_accel(w.cars[0].v, w.cars[1].v, gap, p);
  }
  return idm_free_accel(w.cars[0].v, p);
}

}  // namespace

int VehicleParams::nearest_lane(double y) const {
  const int lane = static_cast<int>(std::lround((y - lane0_center) / lane_width));
  return std::clamp(lane, 0, n_lanes - 1);
}

void world_step(VehicleWorld& world, const VehicleParams& p, double a0, int lane0, double a1,
                int lane1) {
  world.cars[0].lane_cmd = std::clamp(lane0, 0, p.n_lanes - 1);
  world.cars[1].lane_cmd = std::clamp(lane1, 0, p.n_lanes - 1);
  step_single_car(world.cars[0], p, a0, p.lane_center(world.cars[0].lane_cmd));
  step_single_car(world.cars[1], p, a1, p.lane_center(world.cars[1].lane_cmd));
  ++world.step_count;
  if (bodies_overlap(world, p)) world.collided = true;
}

bool bodies_overlap(const VehicleWorld& world, const VehicleParams& p) {
  const double dx = std::abs(world.cars[1].x - world.cars[0].x);
  const double dy = std::abs(world.cars[1].y - world.cars[0].y);
  return dx <= p.car_length && dy <= p.car_width / 2.0;
}

double bumper_gap(const VehicleWorld& world, const VehicleParams& p) {
  return (world.cars[1].x - world.cars[0].x) - p.car_length;
}

double idm_accel(double v, double v_lead, double gap, const VehicleParams& p) {
  if (gap <= 0) return p.a_min;
  const double dv = v - v_lead;
  const double s_star =
      p.idm_s0 + v * p.idm_T + v * dv / (2.0 * std::sqrt(p.idm_a_max * p.idm_b));
  const double ratio = s_star / gap;
  const double a =
      p.idm_a_max * (1.0 - std::pow(v / p.idm_v_des, 4.0) - ratio * ratio);
  return std::clamp(a, p.a_min, p.a_max);
}

double idm_free_accel(double v, const VehicleParams& p) {
  return idm_free_accel(v, p.idm_v_des, p);
}

double idm_free_accel(double v, double v_des, const VehicleParams& p) {
  v_des = std::max(v_des, 0.1);
  const double a = p.idm_a_max * (1.0 - std::pow(v / v_des, 4.0));
  return std::clamp(a, p.a_min, p.a_max);
}

int mobil_decision(const VehicleWorld& world, const VehicleParams& p) {
  const Car& sv = world.cars[0];
  const Car& pov = world.cars[1];
  const int cur = sv.lane_cmd;
  const double gap_lead = bumper_gap(world, p);                   // other car ahead
  const double gap_follow = (sv.x - pov.x) - p.car_length;        // other car behind
  const bool pov_behind = pov.x < sv.x;

  const auto pov_in_lane = [&](int lane) {
    return std::abs(pov.y - p.lane_center(lane)) <= p.follow_lateral_window;
  };
  // Subject acceleration with the subject placed in `lane`.
  const auto self_accel = [&](int lane) {
    if (pov_in_lane(lane) && gap_lead > 0) return idm_accel(sv.v, pov.v, gap_lead, p);
    return idm_free_accel(sv.v, p);
  };
  // Other-car acceleration with/without the subject as its lead.
  const auto pov_accel = [&](bool sv_is_lead) {
    if (sv_is_lead) return idm_accel(pov.v, sv.v, gap_follow, p);
    return idm_free_accel(pov.v, p);
  };

  const double a_self_now = self_accel(cur);
  double best_gain = p.mobil_threshold;
  int best = cur;
  for (const int target : {cur - 1, cur + 1}) {
    if (target < 0 || target >= p.n_lanes) continue;
    // Entry veto: never move onto a lane the other car occupies at close range.
    if (pov_in_lane(target) && abs_bumper_distance(world, p) < p.gap_acceptance) continue;
    const bool becomes_follower = pov_behind && pov_in_lane(target);
    // Safety: the new follower must not be forced below -b_safe.
    if (becomes_follower && pov_accel(true) < -p.mobil_b_safe) continue;
    const double d_self = self_accel(target) - a_self_now;
    double d_new_follower = 0.0;
    double d_old_follower = 0.0;
    if (becomes_follower) d_new_follower = pov_accel(true) - pov_accel(false);
    if (pov_behind && pov_in_lane(cur)) d_old_follower = pov_accel(false) - pov_accel(true);
    const double gain = d_self + p.mobil_politeness * (d_new_follower + d_old_follower);
    if (gain > best_gain) {
      best_gain = gain;
      best = target;
    }
  }
  return best;
}

std::string subject_name(SubjectKind kind) {
  switch (kind) {
    case SubjectKind::Follow: return "follow";
    case SubjectKind::LaneChanging: return "lane-changing";
    case SubjectKind::Mixed: return "mixed";
  }
  throw std::logic_error("unknown subject kind");
}

SubjectKind subject_from_name(const std::string& name) {
  if (name == "follow") return SubjectKind::Follow;
  if (name == "lane-changing") return SubjectKind::LaneChanging;
  if (name == "mixed") return SubjectKind::Mixed;
  throw std::invalid_argument("unknown subject: " + name);
}

std::pair<double, int> subject_act(const VehicleWorld& world, const VehicleParams& p,
                                   SubjectKind kind) {
  const Car& sv = world.cars[0];
  const double a0 = follow_accel(world, p);
  if (kind == SubjectKind::Follow) return {a0, sv.lane_cmd};
  if (kind != SubjectKind::LaneChanging) {
    throw std::logic_error("subject kind must be resolved before acting");
  }
  const bool settled = std::abs(sv.y - p.lane_center(sv.lane_cmd)) < p.settle_y_tol &&
                       std::abs(sv.vy) < p.settle_vy_tol;
  return {a0, settled ? mobil_decision(world, p) : sv.lane_cmd};
}

int guard_lane(const VehicleWorld& world, const VehicleParams& p, int desired) {
  desired = std::clamp(desired, 0, p.n_lanes - 1);
  const Car& sv = world.cars[0];
  const Car& pov = world.cars[1];
  const int cur = p.nearest_lane(pov.y);
  if (desired == cur) return desired;
  if (std::abs(sv.y - p.lane_center(desired)) <= p.follow_lateral_window) {
    // Rate at which the bumper distance is currently shrinking, if any.
    const double closing =
        pov.x >= sv.x ? std::max(0.0, sv.v - pov.v) : std::max(0.0, pov.v - sv.v);
    // One step of closing plus slack, so the distance still exceeds the
    // acceptance gap when the entry completes.
    if (abs_bumper_distance(world, p) <= p.gap_acceptance + closing * p.dt + 0.25) return cur;
  }
  return desired;
}

std::size_t NetParams::size() const {
  return static_cast<std::size_t>(n_hidden) * n_in + n_hidden +
         static_cast<std::size_t>(n_out) * n_hidden + n_out;
}

void NetParams::init_zero() {
  w1.assign(static_cast<std::size_t>(n_hidden) * n_in, 0.0);
  b1.assign(static_cast<std::size_t>(n_hidden), 0.0);
  w2.assign(static_cast<std::size_t>(n_out) * n_hidden, 0.0);
  b2.assign(static_cast<std::size_t>(n_out), 0.0);
}

void NetParams::init_random(Rng& rng, double scale) {
  init_zero();
  const double s1 = scale / std::sqrt(static_cast<double>(n_in));
  const double s2 = scale / std::sqrt(static_cast<double>(n_hidden));
  for (double& w : w1) w = rng.next_normal() * s1;
  for (double& w : w2) w = rng.next_normal() * s2;
}

std::vector<double> NetParams::flat() const {
  std::vector<double> out;
  out.reserve(size());
  out.insert(out.end(), w1.begin(), w1.end());
  out.insert(out.end(), b1.begin(), b1.end());
  out.insert(out.end(), w2.begin(), w2.end());
  out.insert(out.end(), b2.begin(), b2.end());
  return out;
}

void NetParams::set_flat(const std::vector<double>& theta) {
  if (theta.size() != size()) throw std::invalid_argument("parameter vector length mismatch");
  init_zero();
  std::size_t at = 0;
  for (double& w : w1) w = theta[at++];
  for (double& w : b1) w = theta[at++];
  for (double& w : w2) w = theta[at++];
  for (double& w : b2) w = theta[at++];
}

std::vector<double> NetParams::forward(const std::vector<double>& input) const {
  if (static_cast<int>(input.size()) != n_in || w1.size() != static_cast<std::size_t>(n_hidden) * n_in ||
      w2.size() != static_cast<std::size_t>(n_out) * n_hidden) {
    throw std::invalid_argument("network shape mismatch");
  }
  std::vector<double> h(static_cast<std::size_t>(n_hidden));
  for (int j = 0; j < n_hidden; ++j) {
    double z = b1[static_cast<std::size_t>(j)];
    for (int i = 0; i < n_in; ++i) {
      z += w1[static_cast<std::size_t>(j) * n_in + i] * input[static_cast<std::size_t>(i)];
    }
    h[static_cast<std::size_t>(j)] = std::tanh(z);
  }
  std::vector<double> out(static_cast<std::size_t>(n_out));
  for (int j = 0; j < n_out; ++j) {
    double z = b2[static_cast<std::size_t>(j)];
    for (int i = 0; i < n_hidden; ++i) {
      z += w2[static_cast<std::size_t>(j) * n_hidden + i] * h[static_cast<std::size_t>(i)];
    }
    out[static_cast<std::size_t>(j)] = z;
  }
  return out;
}

void save_net(const NetParams& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const VehicleParams ref;
  out << "two-layer-tanh " << net.n_in << ' ' << net.n_hidden << ' ' << net.n_out << '\n';
  out << std::setprecision(17) << "norm " << ref.dx_cap << ' ' << ref.lane_width << ' '
      << ref.v_max << ' ' << ref.v_max << ' ' << ref.v_max << '\n';
  const std::vector<double> theta = net.flat();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    out << theta[i] << (i + 1 == theta.size() ? '\n' : ' ');
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

NetParams load_net(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string magic;
  NetParams net;
  if (!(in >> magic >> net.n_in >> net.n_hidden >> net.n_out) || magic != "two-layer-tanh") {
    throw std::runtime_error("unrecognized network file: " + path);
  }
  if (net.n_in < 1 || net.n_hidden < 1 || net.n_out < 1) {
    throw std::runtime_error("bad network shape in " + path);
  }
  std::string norm_tag;
  double norm_value = 0;
  if (!(in >> norm_tag) || norm_tag != "norm") {
    throw std::runtime_error("missing normalization header in " + path);
  }
  for (int i = 0; i < 5; ++i) {
    if (!(in >> norm_value)) throw std::runtime_error("missing normalization header in " + path);
  }
  std::vector<double> theta(net.size());
  for (double& w : theta) {
    if (!(in >> w)) throw std::runtime_error("truncated parameter array in " + path);
  }
  net.set_flat(theta);
  return net;
}

std::string adversary_name(AdversaryKind kind) {
  switch (kind) {
    case AdversaryKind::Steady: return "steady";
    case AdversaryKind::Brake: return "brake";
    case AdversaryKind::Hybrid: return "hybrid";
    case AdversaryKind::Predictive: return "predictive";
    case AdversaryKind::Learnt: return "learnt";
  }
  throw std::logic_error("unknown adversary kind");
}

AdversaryKind adversary_from_name(const std::string& name) {
  if (name == "steady") return AdversaryKind::Steady;
  if (name == "brake") return AdversaryKind::Brake;
  if (name == "hybrid") return AdversaryKind::Hybrid;
  if (name == "predictive") return AdversaryKind::Predictive;
  if (name == "learnt") return AdversaryKind::Learnt;
  throw std::invalid_argument("unknown adversary: " + name);
}

std::pair<double, int> adversary_act(AdversaryKind kind, const VehicleWorld& world,
                                     const VehicleParams& p, const NetParams* net) {
  const Car& sv = world.cars[0];
  const Car& pov = world.cars[1];
  const double gap = bumper_gap(world, p);
  const double dx = std::min(gap, p.dx_cap);
  const double dy = pov.y - sv.y;

  switch (kind) {
    case AdversaryKind::Steady:
      return {0.0, pov.lane_cmd};
    case AdversaryKind::Brake:
      return {p.a_min, pov.lane_cmd};
    case AdversaryKind::Hybrid: {
      const int sv_lane = p.nearest_lane(sv.y);
      const int pov_lane = p.nearest_lane(pov.y);
      if (pov_lane == sv_lane && gap > 0) return {p.a_min, pov_lane};
      // Regulate the speed difference toward d_x / headway, which steers the
      // distance-over-closing-speed ratio into the cut-in window.
      const double v_target = std::max(0.0, sv.v - dx / p.h_headway);
      const double a1 = std::clamp(p.h_kp * (v_target - pov.v), p.a_min, p.a_max);
      int lane = pov_lane;
      const double closing = sv.v - pov.v;
      if (closing > 0) {
        const double tau = (p.h_ttc_uses_dx ? dx : dy) / closing;
        if (tau >= p.h_ttc_lo && tau <= p.h_ttc_hi && dx >= p.gap_acceptance) lane = sv_lane;
      }
      return {a1, guard_lane(world, p, lane)};
    }
    case AdversaryKind::Predictive: {
      const int cur = p.nearest_lane(pov.y);
      static constexpr double kAccels[] = {-6.0, -3.0, -1.0, 0.0, 1.0, 3.0};
      double best_score = 0.0;
      double best_a = 0.0;
      int best_lane = cur;
      bool have_best = false;
      for (const int lane : {cur, cur - 1, cur + 1}) {
        if (lane < 0 || lane >= p.n_lanes) continue;
        if (guard_lane(world, p, lane) != lane) continue;
        for (const double a : kAccels) {
          Car ghost = pov;
          double total = 0.0;
          for (int t = 1; t <= p.p_horizon; ++t) {
            step_single_car(ghost, p, a, p.lane_center(lane));
            const double sx = sv.x + sv.v * p.dt * t;  // constant-velocity prediction
            total += std::hypot(ghost.x - sx, ghost.y - sv.y);
          }
          const double score = total / p.p_horizon;
          if (!have_best || score < best_score) {
            have_best = true;
            best_score = score;
            best_a = a;
            best_lane = lane;
          }
        }
      }
      return {best_a, best_lane};
    }
    case AdversaryKind::Learnt: {
      if (net == nullptr || net->w1.empty()) {
        throw std::invalid_argument("learnt adversary needs loaded parameters");
      }
      const std::vector<double> input = {dx / p.dx_cap, dy / p.lane_width, sv.v / p.v_max,
                                         pov.v / p.v_max};
      const std::vector<double> out = net->forward(input);
      const double v_des = p.v_max * sigmoid(out[0]);
      const double a1 = idm_free_accel(pov.v, v_des, p);
      int mode = 0;
      for (int j = 1; j < 3; ++j) {
        if (out[static_cast<std::size_t>(1 + j)] > out[static_cast<std::size_t>(1 + mode)]) {
          mode = j;
        }
      }
      const int cur = p.nearest_lane(pov.y);
      const int step_dir = (mode == 1) ? 1 : (mode == 2 ? -1 : 0);
      const int desired = std::clamp(cur + step_dir, 0, p.n_lanes - 1);
      return {a1, guard_lane(world, p, desired)};
    }
  }
  throw std::logic_error("unknown adversary kind");
}

core::StateVector project(const VehicleWorld& world, const VehicleParams& p) {
  return {std::min(bumper_gap(world, p), p.dx_cap), world.cars[1].y - world.cars[0].y,
          world.cars[0].v, world.cars[1].v};
}

VehicleWorld lift(const core::StateVector& s, const VehicleParams& p, Rng& rng) {
  if (s.size() != 4) throw std::invalid_argument("observed state must have 4 coordinates");
  const double dx = s[0], dy = s[1], v0 = s[2], v1 = s[3];
  std::vector<int> feasible;
  for (int lane = 0; lane < p.n_lanes; ++lane) {
    const double pov_y = p.lane_center(lane) + dy;
    if (pov_y >= p.y_min && pov_y <= p.y_max) feasible.push_back(lane);
  }
  if (feasible.empty()) {
    throw std::invalid_argument("no on-road placement for the lateral offset");
  }
  const int lane = feasible[static_cast<std::size_t>(rng.next_below(feasible.size()))];

  VehicleWorld world;
  Car& sv = world.cars[0];
  Car& pov = world.cars[1];
  sv.x = 0.0;
  sv.y = p.lane_center(lane);
  sv.v = v0;
  sv.vy = 0.0;
  sv.lane_cmd = lane;
  pov.x = dx + p.car_length;
  pov.y = sv.y + dy;
  pov.v = v1;
  pov.vy = 0.0;
  pov.lane_cmd = p.nearest_lane(pov.y);
  world.collided = bodies_overlap(world, p);
  return world;
}

core::SpaceSpec make_oss(const VehicleParams& p) {
  core::SpaceSpec space;
  space.name = "vehicle-oss";
  space.dims = {
      {"d_x", "m", core::DimKind::Continuous, 0.0, p.dx_cap},
      {"d_y", "m", core::DimKind::Continuous, -p.lane_width, p.lane_width},
      {"v_0", "m/s", core::DimKind::Continuous, p.v_min, p.v_max},
      {"v_1", "m/s", core::DimKind::Continuous, p.v_min, p.v_max},
  };
  const double length = p.car_length;
  const double half_width = p.car_width / 2.0;
  space.failure = [length, half_width](const core::StateVector& v) {
    return v.size() == 4 && v[0] >= -2.0 * length && v[0] <= 0.0 && std::abs(v[1]) <= half_width;
  };
  space.validate();
  return space;
}

VehicleSystem::VehicleSystem(VehicleParams params, SubjectKind subject)
    : params_(params), subject_(subject), space_(make_oss(params)) {
  if (params_.n_lanes < 1 || params_.dt <= 0) throw std::invalid_argument("bad vehicle parameters");
  active_ = subject_ == SubjectKind::Mixed ? SubjectKind::Follow : subject_;
}

std::string VehicleSystem::label() const { return "vehicle[" + subject_name(subject_) + "]"; }

void VehicleSystem::reset(const core::StateVector& s0, std::uint64_t seed) {
  Rng rng(child_seed(seed, 0x11f7));
  if (subject_ == SubjectKind::Mixed) {
    active_ = (rng.next_u64() & 1u) ? SubjectKind::LaneChanging : SubjectKind::Follow;
  } else {
    active_ = subject_;
  }
  world_ = lift(s0, params_, rng);
}

void VehicleSystem::step(const core::ActionVector& u) {
  if (u.size() != 2) throw std::invalid_argument("vehicle action is [accel, lane]");
  const auto [a0, lane0] = subject_act(world_, params_, active_);
  const int lane1 = static_cast<int>(std::llround(u[1]));
  world_step(world_, params_, a0, lane0, u[0], lane1);
}

core::StateVector VehicleSystem::observed() const { return project(world_, params_); }

core::SpaceSpec VehicleSystem::action_box() const {
  core::SpaceSpec box;
  box.name = "vehicle-actions";
  box.dims = {
      {"a_1", "m/s^2", core::DimKind::Continuous, params_.a_min, params_.a_max},
      {"lane_1", "index", core::DimKind::Integer, 0.0, static_cast<double>(params_.n_lanes - 1)},
  };
  box.validate();
  return box;
}

AdversaryPolicy::AdversaryPolicy(AdversaryKind kind, NetParams net)
    : kind_(kind), net_(std::move(net)) {}

std::string AdversaryPolicy::label() const { return adversary_name(kind_); }

core::ActionVector AdversaryPolicy::act(const core::SystemModel& sys, const core::StateVector&) {
  const auto* veh = dynamic_cast<const VehicleSystem*>(&sys);
  if (veh == nullptr) throw std::invalid_argument("adversary policies require the vehicle system");
  const auto [a1, lane1] = adversary_act(
      kind_, veh->world(), veh->params(), kind_ == AdversaryKind::Learnt ? &net_ : nullptr);
  return {a1, static_cast<double>(lane1)};
}

double episode_reward(const NetParams& net, const VehicleParams& vp, SubjectKind subject, int k,
                      std::uint64_t episode_seed) {
  VehicleSystem sys(vp, subject);
  const core::SpaceSpec& oss = sys.space();
  Rng rng(child_seed(episode_seed, 0xD0));
  core::StateVector s0(4, 0.0);
  for (int tries = 0; tries < 100; ++tries) {
    for (std::size_t d = 0; d < 4; ++d) {
      s0[d] = rng.uniform(oss.dims[d].lo, oss.dims[d].hi);
    }
    if (!oss.in_failure(s0)) break;
  }
  sys.reset(s0, episode_seed);

  double reward = 0.0;
  for (int i = 0; i < k; ++i) {
    const auto [a1, lane1] = adversary_act(AdversaryKind::Learnt, sys.world(), vp, &net);
    sys.step({a1, static_cast<double>(lane1)});
    const VehicleWorld& w = sys.world();
    if (w.collided) {
      reward += 100.0;
      break;
    }
    reward -= std::hypot(w.cars[1].x - w.cars[0].x, w.cars[1].y - w.cars[0].y) / vp.dx_cap;
  }
  return reward;
}

namespace {

double mean_reward(const NetParams& net, const VehicleParams& vp, SubjectKind subject, int k,
                   const std::vector<std::uint64_t>& episode_seeds) {
  double total = 0.0;
  for (const std::uint64_t s : episode_seeds) {
    total += episode_reward(net, vp, subject, k, s);
  }
  return total / static_cast<double>(episode_seeds.size());
}

}  // namespace

TrainResult es_train(const VehicleParams& vp, SubjectKind subject, const EsParams& es,
                     std::uint64_t seed) {
  if (es.population < 2 || es.population % 2 != 0) {
    throw std::invalid_argument("population must be even and at least 2");
  }
  if (es.sigma <= 0 || es.lr <= 0 || es.iterations < 0 || es.episodes_per_member < 1 ||
      es.eval_episodes < 1 || es.k < 1) {
    throw std::invalid_argument("all training parameters must be positive");
  }

  NetParams theta;
  {
    Rng init_rng(child_seed(seed, 0x1000000000000000ull));
    theta.init_random(init_rng, 0.5);
  }
  const std::size_t dim = theta.size();
  const int pairs = es.population / 2;

  std::vector<std::uint64_t> eval_seeds(static_cast<std::size_t>(es.eval_episodes));
  for (std::size_t i = 0; i < eval_seeds.size(); ++i) {
    eval_seeds[i] = child_seed(seed, 0x4000000000000000ull + i);
  }

  TrainResult result;
  result.theta = theta;
  double best_eval = mean_reward(theta, vp, subject, es.k, eval_seeds);

  std::vector<double> flat = theta.flat();
  for (int iter = 0; iter < es.iterations; ++iter) {
    // Shared episode seeds within the iteration; antithetic noise pairs.
    std::vector<std::uint64_t> episode_seeds(static_cast<std::size_t>(es.episodes_per_member));
    for (std::size_t i = 0; i < episode_seeds.size(); ++i) {
      episode_seeds[i] = child_seed(seed, 0x2000000000000000ull +
                                              static_cast<std::uint64_t>(iter) *
                                                  static_cast<std::uint64_t>(es.episodes_per_member) +
                                              i);
    }
    Rng noise_rng(child_seed(seed, 0x3000000000000000ull + static_cast<std::uint64_t>(iter)));
    std::vector<std::vector<double>> noise(static_cast<std::size_t>(pairs));
    for (auto& eps : noise) {
      eps.resize(dim);
      for (double& x : eps) x = noise_rng.next_normal();
    }

    // Evaluate the population concurrently; the reduction below walks members
    // in fixed order, so scheduling cannot change the result.
    std::vector<std::future<double>> futures(static_cast<std::size_t>(es.population));
    for (int m = 0; m < es.population; ++m) {
      const std::vector<double>& eps = noise[static_cast<std::size_t>(m / 2)];
      const double sign = (m % 2 == 0) ? 1.0 : -1.0;
      std::vector<double> member = flat;
      for (std::size_t d = 0; d < dim; ++d) member[d] += es.sigma * sign * eps[d];
      NetParams member_net = theta;
      member_net.set_flat(member);
      futures[static_cast<std::size_t>(m)] =
          std::async(std::launch::async,
                     [member_net = std::move(member_net), &vp, subject, &es, &episode_seeds]() {
                       return mean_reward(member_net, vp, subject, es.k, episode_seeds);
                     });
    }
    std::vector<double> fitness(static_cast<std::size_t>(es.population));
    for (int m = 0; m < es.population; ++m) {
      fitness[static_cast<std::size_t>(m)] = futures[static_cast<std::size_t>(m)].get();
    }

    double mean = 0.0;
    for (const double f : fitness) mean += f;
    mean /= static_cast<double>(es.population);
    double var = 0.0;
    for (const double f : fitness) var += (f - mean) * (f - mean);
    const double stddev = std::sqrt(var / static_cast<double>(es.population));

    if (stddev > 1e-12) {
      std::vector<double> grad(dim, 0.0);
      for (int m = 0; m < es.population; ++m) {
        const double shaped = (fitness[static_cast<std::size_t>(m)] - mean) / stddev;
        const std::vector<double>& eps = noise[static_cast<std::size_t>(m / 2)];
        const double sign = (m % 2 == 0) ? 1.0 : -1.0;
        for (std::size_t d = 0; d < dim; ++d) grad[d] += shaped * sign * eps[d];
      }
      const double scale = es.lr / (static_cast<double>(es.population) * es.sigma);
      for (std::size_t d = 0; d < dim; ++d) flat[d] += scale * grad[d];
      theta.set_flat(flat);
    }

    const double eval = mean_reward(theta, vp, subject, es.k, eval_seeds);
    if (eval > best_eval) {
      best_eval = eval;
      result.theta = theta;
    }
    result.curve.push_back(TrainRow{iter + 1, mean, eval, best_eval});
  }
  return result;
}

void write_curve_csv(const std::vector<TrainRow>& curve, std::ostream& out) {
  out << "iteration,train_mean,eval_mean,best_eval\n";
  out << std::setprecision(17);
  for (const TrainRow& row : curve) {
    out << row.iteration << ',' << row.train_mean << ',' << row.eval_mean << ',' << row.best_eval
        << '\n';
  }
}

}  // namespace safeset::vehicle
