#pragma once

// File and wire formats: W vectors (CSV `id,w` or JSON [{id, w}]), plans,
// reports and id sets.

#include <istream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kfdp/bounds.hpp"
#include "kfdp/calibration.hpp"
#include "kfdp/closed_testing.hpp"
#include "kfdp/stats.hpp"

namespace kfdp {

using json = nlohmann::json;

RawStats read_stats_csv(std::istream& in);
RawStats read_stats_json(const json& doc);
// JSON when the path ends in .json, CSV otherwise.
RawStats load_stats_file(const std::string& path);

// One set per non-blank line; ids separated by commas and/or whitespace.
// Lines starting with '#' are skipped, a lone '-' is the empty set.
std::vector<std::vector<std::string>> read_id_sets(std::istream& in);
std::vector<std::vector<std::string>> load_id_sets(const std::string& path);

// "10:20,25,30:31" -> {10..20, 25, 30, 31}
IndexSet parse_positions(const std::string& text);

json plan_to_json(const VKPlan& plan);
VKPlan plan_from_json(const json& doc);
VKPlan load_plan_file(const std::string& path);

json set_to_json(const IndexSet& set, const PreparedStats& stats);
json fraction_to_json(const Fraction& f);

// `plan` supplies the witness (v, k) pair and the certificate; null for KR,
// which is reported as exact.
json report_to_json(const BoundReport& report, const PreparedStats& stats, const VKPlan* plan);
json ct_outcome_to_json(const CTOutcome& outcome, const PreparedStats& stats, const std::string& label);

}  // namespace kfdp
