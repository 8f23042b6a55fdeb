// Command-line runner: validate / quantify / compare / nfl / report, driven
// by a JSON experiment config.
//
// Exit codes: 0 success (certified / converged / aggressiveness confirmed /
// tallies equal); 1 usage or configuration error; 2 falsified, not more
// aggressive, or tallies unequal; 3 quantification hit the run cap without
// converging.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "safeset/compare.hpp"
#include "safeset/core.hpp"
#include "safeset/covering.hpp"
#include "safeset/io.hpp"
#include "safeset/nflbench.hpp"
#include "safeset/quantify.hpp"
#include "safeset/rng.hpp"
#include "safeset/stats.hpp"
#include "safeset/toys.hpp"
#include "safeset/vehicle.hpp"

namespace core = safeset::core;
namespace cover = safeset::cover;
namespace stats = safeset::stats;
namespace quantify_ns = safeset::quantify;
namespace compare_ns = safeset::compare;
namespace nfl = safeset::nfl;
namespace vehicle = safeset::vehicle;
namespace toys = safeset::toys;
namespace io = safeset::io;

using io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRefuted = 2;
constexpr int kExitNoConvergence = 3;

// Thrown for problems in the config contents (maps to the usage exit code).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double require_number(const json& cfg, const std::string& key) {
  if (!cfg.contains(key) || !cfg[key].is_number()) {
    throw ConfigError("config needs a numeric '" + key + "'");
  }
  return cfg[key].get<double>();
}

std::vector<double> require_vector(const json& cfg, const std::string& key) {
  if (!cfg.contains(key) || !cfg[key].is_array()) {
    throw ConfigError("config needs an array '" + key + "'");
  }
  return cfg[key].get<std::vector<double>>();
}

vehicle::VehicleParams vehicle_params_from(const json& cfg) {
  vehicle::VehicleParams p;
  if (!cfg.contains("vehicle_params")) return p;
  const json& v = cfg["vehicle_params"];
  p.n_lanes = v.value("n_lanes", p.n_lanes);
  p.lane_width = v.value("lane_width", p.lane_width);
  p.lane0_center = v.value("lane0_center", p.lane0_center);
  p.y_min = v.value("y_min", p.y_min);
  p.y_max = v.value("y_max", p.y_max);
  p.car_length = v.value("car_length", p.car_length);
  p.car_width = v.value("car_width", p.car_width);
  p.dt = v.value("dt", p.dt);
  p.a_min = v.value("a_min", p.a_min);
  p.a_max = v.value("a_max", p.a_max);
  p.v_min = v.value("v_min", p.v_min);
  p.v_max = v.value("v_max", p.v_max);
  p.lat_omega = v.value("lat_omega", p.lat_omega);
  p.idm_v_des = v.value("idm_v_des", p.idm_v_des);
  p.idm_a_max = v.value("idm_a_max", p.idm_a_max);
  p.idm_b = v.value("idm_b", p.idm_b);
  p.idm_s0 = v.value("idm_s0", p.idm_s0);
  p.idm_T = v.value("idm_T", p.idm_T);
  p.follow_lateral_window = v.value("follow_lateral_window", p.follow_lateral_window);
  p.mobil_politeness = v.value("mobil_politeness", p.mobil_politeness);
  p.mobil_b_safe = v.value("mobil_b_safe", p.mobil_b_safe);
  p.mobil_threshold = v.value("mobil_threshold", p.mobil_threshold);
  p.settle_y_tol = v.value("settle_y_tol", p.settle_y_tol);
  p.settle_vy_tol = v.value("settle_vy_tol", p.settle_vy_tol);
  p.gap_acceptance = v.value("gap_acceptance", p.gap_acceptance);
  p.h_ttc_lo = v.value("h_ttc_lo", p.h_ttc_lo);
  p.h_ttc_hi = v.value("h_ttc_hi", p.h_ttc_hi);
  p.h_headway = v.value("h_headway", p.h_headway);
  p.h_kp = v.value("h_kp", p.h_kp);
  p.h_ttc_uses_dx = v.value("h_ttc_uses_dx", p.h_ttc_uses_dx);
  p.p_horizon = v.value("p_horizon", p.p_horizon);
  p.dx_cap = v.value("dx_cap", p.dx_cap);
  return p;
}

struct Experiment {
  std::unique_ptr<core::SystemModel> system;
  vehicle::VehicleParams vp;
  bool is_vehicle = false;
};

Experiment build_system(const json& cfg) {
  Experiment e;
  const std::string testbed = cfg.value("testbed", "vehicle");
  if (testbed == "vehicle") {
    e.is_vehicle = true;
    e.vp = vehicle_params_from(cfg);
    const vehicle::SubjectKind subject = vehicle::subject_from_name(cfg.value("subject", "follow"));
    e.system = std::make_unique<vehicle::VehicleSystem>(e.vp, subject);
  } else if (testbed == "drift-toy") {
    e.system = toys::make_drift_toy(require_number(cfg, "lo"), require_number(cfg, "hi"),
                                    require_number(cfg, "fail_below"),
                                    require_number(cfg, "stable_from"));
  } else if (testbed == "shift-toy") {
    e.system = toys::make_shift_toy(require_number(cfg, "lo"), require_number(cfg, "hi"),
                                    require_number(cfg, "fail_at"));
  } else if (testbed == "identity-toy") {
    e.system = toys::make_identity_toy(require_number(cfg, "lo"), require_number(cfg, "hi"));
  } else {
    throw ConfigError("unknown testbed: " + testbed);
  }
  return e;
}

core::SpaceSpec action_box_from_json(const json& dims_cfg) {
  core::SpaceSpec box;
  box.name = "actions";
  for (const json& d : dims_cfg) {
    core::DimSpec dim;
    dim.name = d.value("name", "u");
    dim.unit = d.value("unit", "");
    dim.kind = d.value("kind", "continuous") == "integer" ? core::DimKind::Integer
                                                          : core::DimKind::Continuous;
    dim.lo = require_number(d, "lo");
    dim.hi = require_number(d, "hi");
    box.dims.push_back(dim);
  }
  box.validate();
  return box;
}

// Owner for one testing-algorithm actor built from config.
struct ActorBundle {
  std::unique_ptr<core::PolicyModel> policy;
  std::unique_ptr<core::SpaceSpec> box;
  stats::ActorSpec actor;
};

ActorBundle make_actor(const json& acfg, Experiment& e) {
  ActorBundle b;
  const std::string type = acfg.value("type", "adversary");
  if (type == "adversary") {
    if (!e.is_vehicle) throw ConfigError("adversary actors require the vehicle testbed");
    const vehicle::AdversaryKind kind = vehicle::adversary_from_name(
        acfg.contains("name") ? acfg["name"].get<std::string>() : std::string("steady"));
    vehicle::NetParams net;
    if (kind == vehicle::AdversaryKind::Learnt) {
      if (!acfg.contains("theta_file")) {
        throw ConfigError("the learnt adversary needs 'theta_file'");
      }
      net = vehicle::load_net(acfg["theta_file"].get<std::string>());
    }
    b.policy = std::make_unique<vehicle::AdversaryPolicy>(kind, std::move(net));
    b.actor.policy = b.policy.get();
    b.actor.label = b.policy->label();
  } else if (type == "controlled") {
    if (acfg.contains("action_box")) {
      b.box = std::make_unique<core::SpaceSpec>(action_box_from_json(acfg["action_box"]));
    } else if (e.is_vehicle) {
      auto& veh = dynamic_cast<vehicle::VehicleSystem&>(*e.system);
      b.box = std::make_unique<core::SpaceSpec>(veh.action_box());
    } else {
      throw ConfigError("controlled actors on a toy testbed need 'action_box'");
    }
    b.actor.action_box = b.box.get();
    b.actor.label = "controlled";
  } else if (type == "constant") {
    b.policy = std::make_unique<toys::ConstantPolicy>(require_vector(acfg, "action"));
    b.actor.policy = b.policy.get();
    b.actor.label = "constant";
  } else {
    throw ConfigError("unknown actor type: " + type);
  }
  return b;
}

const json& actor_config(const json& cfg, const std::string& key) {
  if (!cfg.contains(key)) throw ConfigError("config needs an '" + key + "' actor");
  return cfg[key];
}

stats::ConfidenceSpec confidence_from(const json& cfg) {
  return {require_number(cfg, "epsilon"), require_number(cfg, "beta")};
}

cover::CoveringSet candidate_from(const json& cfg, const core::SpaceSpec& oss) {
  if (cfg.contains("candidate_file")) {
    json j = io::load_json(cfg["candidate_file"].get<std::string>());
    const json& c = j.contains("cover") ? j["cover"] : j;
    cover::CoveringSet set;
    set.space = oss;
    set.delta = c["delta"].get<std::vector<double>>();
    set.centroids = c["centroids"].get<std::vector<core::StateVector>>();
    set.grid_aligned = false;
    return set;
  }
  return cover::build_covering(oss, require_vector(cfg, "delta"));
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

int cmd_validate(const json& cfg, std::uint64_t seed, const std::string& out_dir) {
  Experiment e = build_system(cfg);
  ActorBundle actor = make_actor(actor_config(cfg, "actor"), e);
  const stats::ConfidenceSpec spec = confidence_from(cfg);
  const int k = static_cast<int>(require_number(cfg, "k"));
  const cover::CoveringSet candidate = candidate_from(cfg, e.system->space());

  const stats::ValidateResult result =
      stats::validate_safe_set(candidate, actor.actor, *e.system, spec, k, seed);

  io::write_json_file(join_path(out_dir, "validate.json"), io::validate_to_json(result));
  io::write_text(join_path(out_dir, "candidate_centroids.csv"), cover::centroids_csv(candidate));
  if (stats::certified(result)) {
    const auto& cert = std::get<stats::SafeSetCertificate>(result);
    std::cout << "certified: " << cert.runs_used << " clean runs over " << candidate.size()
              << " centroids\n";
    return kExitOk;
  }
  const auto& f = std::get<stats::Falsified>(result);
  std::cout << "falsified: run " << f.run_index << " (" << f.reason << ")\n";
  return kExitRefuted;
}

int cmd_quantify(const json& cfg, std::uint64_t seed, const std::string& out_dir) {
  Experiment e = build_system(cfg);
  ActorBundle actor = make_actor(actor_config(cfg, "actor"), e);
  quantify_ns::QuantifyParams params;
  params.spec = confidence_from(cfg);
  params.delta = require_vector(cfg, "delta");
  params.k = static_cast<int>(require_number(cfg, "k"));
  params.max_runs = cfg.value("max_runs", 100000);
  params.seed = seed;

  const quantify_ns::QuantifyResult result =
      quantify_ns::quantify(e.system->space(), *e.system, actor.actor, params);

  io::write_json_file(join_path(out_dir, "quantify.json"), io::quantify_summary(result));
  io::write_quantify_audit_jsonl(result, join_path(out_dir, "audit.jsonl"));
  io::write_text(join_path(out_dir, "centroids.csv"), cover::centroids_csv(result.cover));
  std::cout << (result.valid ? "converged: " : "run cap reached: ") << result.cover.size()
            << " surviving centroids, " << result.runs_total << " runs ("
            << result.failure_runs << " failures)\n";
  return result.valid ? kExitOk : kExitNoConvergence;
}

int cmd_compare(const json& cfg, std::uint64_t seed, const std::string& out_dir) {
  Experiment e = build_system(cfg);
  ActorBundle te1 = make_actor(actor_config(cfg, "te1"), e);
  ActorBundle te2 = make_actor(actor_config(cfg, "te2"), e);
  compare_ns::CompareParams params;
  params.spec = confidence_from(cfg);
  params.delta = require_vector(cfg, "delta");
  params.k = static_cast<int>(require_number(cfg, "k"));
  params.max_runs = cfg.value("max_runs", 100000);
  params.seed = seed;

  const compare_ns::AggressivenessVerdict verdict = compare_ns::compare_algorithms(
      {te1.actor}, {te2.actor}, e.system->space(), *e.system, params);

  io::write_json_file(join_path(out_dir, "verdict.json"), io::verdict_to_json(verdict));
  io::write_text(join_path(out_dir, "phi1_centroids.csv"), cover::centroids_csv(verdict.phi1));
  io::write_text(join_path(out_dir, "phi2_centroids.csv"), cover::centroids_csv(verdict.phi2));
  std::cout << "agg(" << te1.actor.label << " over " << te2.actor.label
            << "): " << (verdict.agg ? "true" : "false") << " ["
            << io::outcome_name(verdict.outcome) << ", " << verdict.runs_used
            << " check runs]\n";
  return verdict.agg ? kExitOk : kExitRefuted;
}

nfl::ExplorationOrder order_from(const json& spec, int n_states, int n_actions, int k,
                                 const std::vector<int>& init_states) {
  if (spec.is_string() && spec.get<std::string>() == "canonical") {
    return nfl::canonical_order(n_states, n_actions, k, init_states);
  }
  if (spec.is_number()) {
    return nfl::shuffled_order(n_states, n_actions, k, spec.get<std::uint64_t>(), init_states);
  }
  throw ConfigError("an exploration order is \"canonical\" or a shuffle seed");
}

int cmd_nfl(const json& cfg, const std::string& out_dir) {
  if (!cfg.contains("nfl")) throw ConfigError("config needs an 'nfl' section");
  const json& n = cfg["nfl"];
  const int n_states = static_cast<int>(require_number(n, "n_states"));
  const int n_actions = static_cast<int>(require_number(n, "n_actions"));
  const int k = static_cast<int>(require_number(n, "k"));
  const int m = static_cast<int>(require_number(n, "m"));
  std::vector<int> failure_states;
  if (n.contains("failure_states")) failure_states = n["failure_states"].get<std::vector<int>>();
  std::vector<int> init_states;
  if (n.contains("init_states")) init_states = n["init_states"].get<std::vector<int>>();

  const std::string cost_name = n.value("cost", "failure");
  nfl::TableCost cost;
  if (cost_name == "failure") {
    cost = nfl::table_failure_cost(failure_states);
  } else if (cost_name == "run-identity") {
    cost = nfl::table_run_identity();
  } else {
    throw ConfigError("unknown cost: " + cost_name);
  }

  const nfl::ExplorationOrder order1 =
      order_from(n.contains("order1") ? n["order1"] : json("canonical"), n_states, n_actions, k,
                 init_states);
  const nfl::ExplorationOrder order2 =
      order_from(n.contains("order2") ? n["order2"] : json(1), n_states, n_actions, k, init_states);

  const nfl::NflVerdict verdict = nfl::verify_nfl(order1, order2, m, cost, failure_states);
  io::write_json_file(join_path(out_dir, "nfl.json"), io::nfl_to_json(verdict, m));
  std::cout << "cost tallies over all " << nfl::table_space_size(n_states, n_actions)
            << " systems, m=" << m << ": " << (verdict.equal ? "equal" : "UNEQUAL") << '\n';
  return verdict.equal ? kExitOk : kExitRefuted;
}

int cmd_report(const json& cfg, std::uint64_t seed, const std::string& out_dir) {
  const json rcfg = cfg.value("report", json::object());
  const int runs = rcfg.value("runs", 1000);
  const int k = rcfg.value("k", 50);
  std::vector<std::string> subjects =
      rcfg.value("subjects", std::vector<std::string>{"follow", "lane-changing"});
  std::vector<std::string> adversaries = rcfg.value(
      "adversaries", std::vector<std::string>{"steady", "brake", "hybrid", "predictive", "learnt"});

  const vehicle::VehicleParams vp = vehicle_params_from(cfg);
  vehicle::NetParams net;
  bool net_loaded = false;
  for (const std::string& a : adversaries) {
    if (a == "learnt") {
      if (!rcfg.contains("theta_file") && !cfg.contains("theta_file")) {
        throw ConfigError("a report over the learnt adversary needs 'theta_file'");
      }
      const std::string path = rcfg.contains("theta_file")
                                   ? rcfg["theta_file"].get<std::string>()
                                   : cfg["theta_file"].get<std::string>();
      net = vehicle::load_net(path);
      net_loaded = true;
    }
  }

  json table = json::object();
  std::ostringstream csv;
  csv << "subject";
  for (const std::string& a : adversaries) csv << ',' << a;
  csv << '\n';

  std::size_t pair_index = 0;
  for (const std::string& subject : subjects) {
    const vehicle::SubjectKind skind = vehicle::subject_from_name(subject);
    table[subject] = json::object();
    csv << subject;
    for (const std::string& adversary : adversaries) {
      const vehicle::AdversaryKind akind = vehicle::adversary_from_name(adversary);
      if (akind == vehicle::AdversaryKind::Learnt && !net_loaded) {
        throw ConfigError("learnt adversary parameters missing");
      }
      vehicle::VehicleSystem sys(vp, skind);
      vehicle::AdversaryPolicy policy(akind, net);
      const std::uint64_t pair_seed = safeset::child_seed(seed, 0x9e0 + pair_index++);
      safeset::Rng sampler(safeset::child_seed(pair_seed, 0));
      int failures = 0;
      for (int i = 0; i < runs; ++i) {
        core::StateVector s0(4, 0.0);
        for (int tries = 0; tries < 100; ++tries) {
          for (std::size_t d = 0; d < 4; ++d) {
            s0[d] = sampler.uniform(sys.space().dims[d].lo, sys.space().dims[d].hi);
          }
          if (!sys.space().in_failure(s0)) break;
        }
        const core::RunRecord run = core::execute_run(
            sys, core::ActionSource{&policy, nullptr}, s0, k, safeset::child_seed(pair_seed, 1 + i));
        if (run.hit_failure) ++failures;
      }
      const double fr = static_cast<double>(failures) / runs;
      table[subject][adversary] = fr;
      csv << ',' << fr;
    }
    csv << '\n';
  }

  json out = {{"kind", "failure-rate-table"},
              {"runs", runs},
              {"k", k},
              {"seed", seed},
              {"table", table}};

  // Optional d_x/d_y slices through stored quantification covers at a fixed
  // speed pair.
  if (rcfg.contains("slice")) {
    const json& slice = rcfg["slice"];
    const double v0 = require_number(slice, "v0");
    const double v1 = require_number(slice, "v1");
    json slice_files = json::array();
    for (const json& artifact : slice.value("artifacts", json::array())) {
      const std::string label = artifact.value("label", "cover");
      const std::string file = artifact["file"].get<std::string>();
      const json q = io::load_json(file);
      const auto centroids = q["cover"]["centroids"].get<std::vector<core::StateVector>>();
      std::ostringstream sc;
      sc << "d_x,d_y\n";
      for (const core::StateVector& c : centroids) {
        if (c.size() == 4 && std::abs(c[2] - v0) < 1e-9 && std::abs(c[3] - v1) < 1e-9) {
          sc << c[0] << ',' << c[1] << '\n';
        }
      }
      const std::string slice_path = join_path(out_dir, "slice_" + label + ".csv");
      io::write_text(slice_path, sc.str());
      slice_files.push_back(slice_path);
    }
    out["slices"] = slice_files;
  }

  io::write_json_file(join_path(out_dir, "report.json"), out);
  io::write_text(join_path(out_dir, "failure_rates.csv"), csv.str());
  std::cout << "failure-rate table over " << runs << " runs written to " << out_dir << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Black-box statistical safety-set testing toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool seed_given = false;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--seed", seed_override, "master seed override")
        ->each([&](const std::string&) { seed_given = true; });
    sub->add_option("--out", out_override, "output directory override");
  };

  CLI::App* validate = app.add_subcommand("validate", "certify a candidate safe set");
  CLI::App* quantify = app.add_subcommand("quantify", "prune a covering to an almost-safe set");
  CLI::App* compare = app.add_subcommand("compare", "order two testing algorithms");
  CLI::App* nfl_cmd = app.add_subcommand("nfl", "exhaustive cost-tally equality check");
  CLI::App* report = app.add_subcommand("report", "failure-rate table and cover slices");
  for (CLI::App* sub : {validate, quantify, compare, nfl_cmd, report}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    const json cfg = io::load_json(config_path);
    const std::uint64_t seed =
        seed_given ? seed_override : cfg.value("seed", static_cast<std::uint64_t>(0));
    const std::string out_dir = !out_override.empty() ? out_override : cfg.value("out", "out");
    io::ensure_dir(out_dir);

    if (validate->parsed()) return cmd_validate(cfg, seed, out_dir);
    if (quantify->parsed()) return cmd_quantify(cfg, seed, out_dir);
    if (compare->parsed()) return cmd_compare(cfg, seed, out_dir);
    if (nfl_cmd->parsed()) return cmd_nfl(cfg, out_dir);
    if (report->parsed()) return cmd_report(cfg, seed, out_dir);
    std::cerr << "no subcommand selected\n";
    return kExitUsage;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}
