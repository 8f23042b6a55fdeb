#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "safeset/compare.hpp"
#include "safeset/core.hpp"
#include "safeset/covering.hpp"
#include "safeset/nflbench.hpp"
#include "safeset/quantify.hpp"
#include "safeset/stats.hpp"

namespace safeset::io {

using json = nlohmann::json;

// Run records: one JSON object per line with exactly the replayable fields
// {s0, states, actions, seed, hit_failure}.
json run_to_json(const core::RunRecord& run);
void write_runs_jsonl(const std::vector<core::RunRecord>& runs, const std::string& path);

json covering_to_json(const cover::CoveringSet& cover);

json certificate_to_json(const stats::SafeSetCertificate& cert);
json falsified_to_json(const stats::Falsified& falsified);
json validate_to_json(const stats::ValidateResult& result);

json quantify_summary(const quantify::QuantifyResult& result);
void write_quantify_audit_jsonl(const quantify::QuantifyResult& result, const std::string& path);

std::string outcome_name(compare::CompareOutcome outcome);
json verdict_to_json(const compare::AggressivenessVerdict& verdict);

json tally_to_json(const nfl::Tally& tally);
json nfl_to_json(const nfl::NflVerdict& verdict, int m);

// Small file helpers; all throw std::runtime_error on I/O failure.
void ensure_dir(const std::string& dir);
void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);
json load_json(const std::string& path);
void write_json_file(const std::string& path, const json& value, int indent = 2);

}  // namespace safeset::io
