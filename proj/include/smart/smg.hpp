#pragma once

#include "smart/core_types.hpp"
#include "smart/transform.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace smart {

struct MetamorphicGroup {
  SourceFrame source;
  RgbImage follow_up;
  MGConfig config;
};

struct SMGInstance {
  SMGSpec spec;
  SourceFrame source;
  std::vector<MetamorphicGroup> groups;  // one per config, spec order
};

/// Builds every follow-up of `spec` for one source frame, in declared order.
/// Transform errors are rethrown with the failing config label prefixed.
SMGInstance generate_smg(const SMGSpec& spec, const SourceFrame& source, const TransformContext& ctx);

/// Parses SMG specifications from YAML text. `origin` names the source in
/// diagnostics. Throws ParseError (with line/column) or InvalidSpec.
std::vector<SMGSpec> parse_smg_specs(std::string_view yaml, std::string_view origin = "<string>");
std::vector<SMGSpec> load_smg_specs(const std::filesystem::path& path);

/// The bundled four-sweep configuration (positions, oncoming positions,
/// colours, snow intensities).
std::string_view default_smg_yaml();
std::vector<SMGSpec> default_smg_specs();

/// `partitions` equal-width steps from lo to hi, both ends included
/// (partitions + 1 values).
std::vector<double> partition_range(double lo, double hi, int partitions);

/// left-N / center / right-N for a lateral offset.
std::string position_label(int lateral_offset_px);

/// Shortest decimal that round-trips, e.g. 0.2 -> "0.2", 1 -> "1.0".
std::string format_decimal(double v);

}  // namespace smart
