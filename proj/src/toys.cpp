#include "safeset/toys.hpp"

namespace safeset::toys {

using core::ActionVector;
using core::DimKind;
using core::SpaceSpec;
using core::StateVector;

namespace {

SpaceSpec box1d(const std::string& name, double lo, double hi,
                std::function<bool(const StateVector&)> failure) {
  SpaceSpec spec;
  spec.name = name;
  spec.dims = {{"s", "", DimKind::Continuous, lo, hi}};
  spec.failure = std::move(failure);
  return spec;
}

}  // namespace

std::unique_ptr<PureSystem> make_identity_toy(double lo, double hi,
                                              std::function<bool(const StateVector&)> failure) {
  return std::make_unique<PureSystem>(
      box1d("identity-1d", lo, hi, std::move(failure)),
      [](const StateVector& s, const ActionVector&, Rng&) { return s; }, "identity");
}

std::unique_ptr<PureSystem> make_drift_toy(double lo, double hi, double fail_below,
                                           double stable_from) {
  return std::make_unique<PureSystem>(
      box1d("drift-1d", lo, hi,
            [fail_below](const StateVector& s) { return s[0] < fail_below; }),
      [stable_from](const StateVector& s, const ActionVector&, Rng&) {
        StateVector next = s;
        if (next[0] < stable_from) next[0] -= 1.0;
        return next;
      },
      "drift");
}

std::unique_ptr<PureSystem> make_shift_toy(double lo, double hi, double fail_at) {
  return std::make_unique<PureSystem>(
      box1d("shift-1d", lo, hi, [fail_at](const StateVector& s) { return s[0] >= fail_at; }),
      [](const StateVector& s, const ActionVector& u, Rng&) {
        StateVector next = s;
        next[0] += u.empty() ? 0.0 : u[0];
        return next;
      },
      "shift");
}

}  // namespace safeset::toys
