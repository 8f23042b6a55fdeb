#pragma once

#include <functional>
#include <memory>
#include <string>

#include "safeset/core.hpp"

namespace safeset::toys {

// Wraps a stateless transition function into the episodic system interface.
// The function sees the per-episode rng for any disturbance it wants.
class PureSystem : public core::SystemModel {
 public:
  using StepFn =
      std::function<core::StateVector(const core::StateVector&, const core::ActionVector&, Rng&)>;

  PureSystem(core::SpaceSpec spec, StepFn step, std::string label)
      : spec_(std::move(spec)), step_(std::move(step)), label_(std::move(label)) {
    spec_.validate();
  }

  const core::SpaceSpec& space() const override { return spec_; }
  std::string label() const override { return label_; }
  void reset(const core::StateVector& s0, std::uint64_t seed) override {
    state_ = s0;
    rng_ = Rng(seed);
  }
  void step(const core::ActionVector& u) override { state_ = step_(state_, u, rng_); }
  core::StateVector observed() const override { return state_; }

 private:
  core::SpaceSpec spec_;
  StepFn step_;
  std::string label_;
  core::StateVector state_;
  Rng rng_;
};

// s' = s (fixed points everywhere). No unsafe region unless one is supplied.
std::unique_ptr<PureSystem> make_identity_toy(double lo, double hi,
                                              std::function<bool(const core::StateVector&)> failure = {});

// 1-D drift: s' = s - 1 while s < stable_from, fixed point at and above it;
// unsafe below fail_below. With stable_from > hi the whole box drains.
std::unique_ptr<PureSystem> make_drift_toy(double lo, double hi, double fail_below,
                                           double stable_from);

// 1-D controlled shift: s' = s + u. Unsafe at and above fail_at.
std::unique_ptr<PureSystem> make_shift_toy(double lo, double hi, double fail_at);

// Policy emitting a fixed action everywhere.
class ConstantPolicy : public core::PolicyModel {
 public:
  explicit ConstantPolicy(core::ActionVector u, std::string label = "constant")
      : u_(std::move(u)), label_(std::move(label)) {}
  std::string label() const override { return label_; }
  core::ActionVector act(const core::SystemModel&, const core::StateVector&) override { return u_; }

 private:
  core::ActionVector u_;
  std::string label_;
};

// Policy computed from the recorded state.
class LambdaPolicy : public core::PolicyModel {
 public:
  using Fn = std::function<core::ActionVector(const core::StateVector&)>;
  LambdaPolicy(Fn fn, std::string label) : fn_(std::move(fn)), label_(std::move(label)) {}
  std::string label() const override { return label_; }
  core::ActionVector act(const core::SystemModel&, const core::StateVector& s) override {
    return fn_(s);
  }

 private:
  Fn fn_;
  std::string label_;
};

}  // namespace safeset::toys
