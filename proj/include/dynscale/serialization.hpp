#pragma once

// JSON mappings for every persisted type. Non-finite doubles are written as
// the strings "inf", "-inf" and "nan" so that files stay valid JSON and
// round-trip exactly.

#include <vector>

#include "dynscale/allocator.hpp"
#include "dynscale/answer.hpp"
#include "dynscale/harness.hpp"
#include "dynscale/simulator.hpp"
#include "dynscale/types.hpp"
#include "json.hpp"

namespace dynscale {

using nlohmann::json;

json double_to_json(double v);
double double_from_json(const json& j);

void to_json(json& j, const Query& q);
void from_json(const json& j, Query& q);

void to_json(json& j, const ResponseRecord& r);
void from_json(const json& j, ResponseRecord& r);

void to_json(json& j, const PriorityScore& s);
void from_json(const json& j, PriorityScore& s);

void to_json(json& j, const AllocationRound& r);
void from_json(const json& j, AllocationRound& r);

void to_json(json& j, const ExtractionPattern& p);
void from_json(const json& j, ExtractionPattern& p);

void to_json(json& j, const SimulatorProfile& p);
void from_json(const json& j, SimulatorProfile& p);

void to_json(json& j, const FinalAnswer& a);
void from_json(const json& j, FinalAnswer& a);

void to_json(json& j, const RunConfig& c);
void from_json(const json& j, RunConfig& c);

json profiles_to_json(const std::vector<SimulatorProfile>& profiles);
std::vector<SimulatorProfile> profiles_from_json(const json& doc);

json patterns_to_json(const std::vector<ExtractionPattern>& patterns);
std::vector<ExtractionPattern> patterns_from_json(const json& doc);

/// Whole record as a single document (used by replay comparison).
json record_to_json(const RunRecord& record, bool include_wall_clock);

}  // namespace dynscale
