#include "safeset/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace safeset::io {

namespace {

json dims_to_json(const core::SpaceSpec& space) {
  json dims = json::array();
  for (const core::DimSpec& d : space.dims) {
    dims.push_back({{"name", d.name},
                    {"unit", d.unit},
                    {"kind", d.kind == core::DimKind::Integer ? "integer" : "continuous"},
                    {"lo", d.lo},
                    {"hi", d.hi}});
  }
  return dims;
}

std::ofstream open_out(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace

json run_to_json(const core::RunRecord& run) {
  return {{"s0", run.s0},
          {"states", run.states},
          {"actions", run.actions},
          {"seed", run.seed},
          {"hit_failure", run.hit_failure}};
}

void write_runs_jsonl(const std::vector<core::RunRecord>& runs, const std::string& path) {
  std::ofstream out = open_out(path);
  for (const core::RunRecord& run : runs) {
    out << run_to_json(run).dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

json covering_to_json(const cover::CoveringSet& cover) {
  return {{"space", cover.space.name},
          {"dims", dims_to_json(cover.space)},
          {"delta", cover.delta},
          {"count", cover.centroids.size()},
          {"grid_aligned", cover.grid_aligned},
          {"centroids", cover.centroids}};
}

json certificate_to_json(const stats::SafeSetCertificate& cert) {
  return {{"kind", "safe-set-certificate"},
          {"certified", true},
          {"system", cert.system_label},
          {"actor", cert.actor_label},
          {"mode", cert.mode},
          {"epsilon", cert.spec.epsilon},
          {"beta", cert.spec.beta},
          {"runs_used", cert.runs_used},
          {"seed", cert.seed},
          {"cover", covering_to_json(cert.cover)}};
}

json falsified_to_json(const stats::Falsified& falsified) {
  return {{"kind", "falsification"},
          {"certified", false},
          {"reason", falsified.reason},
          {"run_index", falsified.run_index},
          {"run", run_to_json(falsified.run)}};
}

json validate_to_json(const stats::ValidateResult& result) {
  if (const auto* cert = std::get_if<stats::SafeSetCertificate>(&result)) {
    return certificate_to_json(*cert);
  }
  return falsified_to_json(std::get<stats::Falsified>(result));
}

json quantify_summary(const quantify::QuantifyResult& result) {
  return {{"kind", "quantification"},
          {"valid", result.valid},
          {"runs_total", result.runs_total},
          {"failure_runs", result.failure_runs},
          {"pruned_centroids", result.pruned_centroids},
          {"surviving_centroids", result.cover.centroids.size()},
          {"cover", covering_to_json(result.cover)}};
}

void write_quantify_audit_jsonl(const quantify::QuantifyResult& result, const std::string& path) {
  std::ofstream out = open_out(path);
  for (const quantify::AuditEntry& e : result.log) {
    const json line = {{"iteration", e.iteration},   {"s0", e.s0},
                       {"from_buffer", e.from_buffer}, {"failure", e.failure},
                       {"pruned_this_run", e.pruned_this_run}, {"buffer_size", e.buffer_size},
                       {"streak", e.streak}};
    out << line.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string outcome_name(compare::CompareOutcome outcome) {
  switch (outcome) {
    case compare::CompareOutcome::FalsifiedByTe2: return "falsified-by-te2";
    case compare::CompareOutcome::Contained: return "contained";
    case compare::CompareOutcome::ContainedSmallEscape: return "contained-small-escape";
    case compare::CompareOutcome::FullQuantification: return "full-quantification";
  }
  throw std::logic_error("unknown compare outcome");
}

json verdict_to_json(const compare::AggressivenessVerdict& verdict) {
  json out = {{"kind", "aggressiveness-verdict"},
              {"agg", verdict.agg},
              {"outcome", outcome_name(verdict.outcome)},
              {"runs_used", verdict.runs_used},
              {"escape_mass_ratio", verdict.escape_mass_ratio},
              {"grown_centroids", verdict.grown_centroids},
              {"phi1_count", verdict.phi1.centroids.size()},
              {"phi2_count", verdict.phi2.centroids.size()},
              {"phi1", covering_to_json(verdict.phi1)},
              {"phi2", covering_to_json(verdict.phi2)}};
  if (verdict.te2_quantify_runs >= 0) out["te2_quantify_runs"] = verdict.te2_quantify_runs;
  return out;
}

json tally_to_json(const nfl::Tally& tally) {
  json out = json::array();
  for (const auto& [costs, count] : tally) {
    out.push_back({{"costs", costs}, {"count", count}});
  }
  return out;
}

json nfl_to_json(const nfl::NflVerdict& verdict, int m) {
  json out = {{"kind", "enumeration-equality"},
              {"equal", verdict.equal},
              {"m", m},
              {"tally1", tally_to_json(verdict.tally1)},
              {"tally2", tally_to_json(verdict.tally2)}};
  if (verdict.first_difference.has_value()) {
    out["first_difference"] = *verdict.first_difference;
  } else {
    out["first_difference"] = nullptr;
  }
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out = open_out(path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return json::parse(in);
}

void write_json_file(const std::string& path, const json& value, int indent) {
  std::ofstream out = open_out(path);
  out << value.dump(indent) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace safeset::io
