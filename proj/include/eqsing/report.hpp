#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "eqsing/equilibrium.hpp"
#include "eqsing/model.hpp"
#include "eqsing/simulate.hpp"

namespace eqsing {

inline constexpr const char* kToolName = "eqsing";
inline constexpr const char* kToolVersion = "0.1.0";

/// FNV-1a content hash of a file, as a hex string.
std::string fnv1a_file_hex(const std::string& path);

nlohmann::json manifest_json(const std::string& instance_file,
                             const SpaceTimeGrid& grid, std::uint64_t seed,
                             const std::string& out_dir,
                             const nlohmann::json& options);

nlohmann::json to_json(const IterationStats& st);
nlohmann::json trace_json(const EquilibriumSolution& sol);
nlohmann::json to_json(const ResidualReport& r);
nlohmann::json to_json(const MCReport& r);
nlohmann::json to_json(const PerturbReport& r);
nlohmann::json to_json(const AssumptionReport& r);
nlohmann::json oracle_json(const OracleReport& r);

/// Structural check against the published schema (docs/report.schema.json):
/// required keys present with the right JSON types.
bool validate_report(const nlohmann::json& rep, std::string* error);

void write_json(const std::string& path, const nlohmann::json& j);

}  // namespace eqsing
