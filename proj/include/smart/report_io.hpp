#pragma once

#include "smart/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace smart {

nlohmann::ordered_json spec_to_json(const SMGSpec& spec);
SMGSpec spec_from_json(const nlohmann::json& j);

nlohmann::ordered_json sut_to_json(const SutDescriptor& sut);
SutDescriptor sut_from_json(const nlohmann::json& j);

nlohmann::ordered_json observations_to_json(const FrameObservations& f);
FrameObservations observations_from_json(const nlohmann::json& j);

/// Column header for a theta, e.g. "u@0.02".
std::string theta_column(std::string_view prefix, double theta);

/// RFC 4180 field quoting.
std::string csv_field(std::string_view s);

/// One row per cell: frame_id, config, sa_s, sa_f, ad, ad_ref, m, u@theta...,
/// violation, curved, error.
std::string results_csv(const RunReport& report);

/// Counts and exact rates per config and rollup.
std::string aggregates_csv(const RunReport& report);

std::string latency_csv(const std::vector<LatencyRecord>& latencies);

/// Sealed report: spec, SUT, settings and raw observations. Derived values
/// are recomputed on load.
nlohmann::ordered_json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Throws ReportFormatError for missing or corrupt files.
RunReport read_report(const std::filesystem::path& dir);

struct ManifestExtras {
  std::map<std::string, std::string> inputs;  // name -> description/path
  std::map<std::string, std::string> input_hashes;
  std::vector<std::string> command_line;
};

/// Writes report.json, results.csv, aggregates.csv, latency.csv and
/// manifest.json (with content hashes of the deterministic outputs).
void write_run_outputs(const RunReport& report, const std::filesystem::path& dir, const ManifestExtras& extras);

}  // namespace smart
