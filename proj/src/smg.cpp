#include "smart/smg.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace smart {
namespace {

constexpr const char* kDefaultYaml =
#include "smg_default_yaml.inc"
    ;

template <typename E>
[[noreturn]] void rethrow_annotated(const std::string& label, const E& e) {
  throw E("config '" + label + "': " + e.what());
}

class SpecParser {
 public:
  explicit SpecParser(std::string_view origin) : origin_(origin) {}

  std::vector<SMGSpec> parse(std::string_view text) {
    YAML::Node root;
    try {
      root = YAML::Load(std::string(text));
    } catch (const YAML::ParserException& e) {
      throw ParseError(origin_ + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                       ": " + e.msg);
    }
    if (!root.IsMap() || !root["smgs"]) fail(root, "smgs", "top-level 'smgs' list is required");
    const YAML::Node list = root["smgs"];
    if (!list.IsSequence()) fail(list, "smgs", "must be a list");

    std::vector<SMGSpec> specs;
    for (const auto& node : list) specs.push_back(parse_spec(node));
    return specs;
  }

 private:
  [[noreturn]] void fail(const YAML::Node& node, std::string_view field, std::string_view msg) const {
    const auto mark = node.Mark();
    std::string where = origin_;
    if (!mark.is_null()) where += ":" + std::to_string(mark.line + 1) + ":" + std::to_string(mark.column + 1);
    throw ParseError(where + ": field '" + std::string(field) + "': " + std::string(msg));
  }

  template <typename T>
  T scalar(const YAML::Node& parent, const char* field) const {
    const YAML::Node n = parent[field];
    if (!n) fail(parent, field, "is required");
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, field, "has the wrong type");
    }
  }

  template <typename T>
  std::optional<T> optional_scalar(const YAML::Node& parent, const char* field) const {
    if (!parent[field]) return std::nullopt;
    return scalar<T>(parent, field);
  }

  MetricKind metric(const YAML::Node& parent, const char* field) const {
    const auto s = scalar<std::string>(parent, field);
    try {
      return parse_metric_kind(s);
    } catch (const InvalidValue& e) {
      fail(parent[field], field, e.what());
    }
  }

  TransformKind kind(const YAML::Node& parent) const {
    const auto s = scalar<std::string>(parent, "kind");
    try {
      return parse_transform_kind(s);
    } catch (const InvalidValue& e) {
      fail(parent["kind"], "kind", e.what());
    }
  }

  MGConfig parse_config(const YAML::Node& node) const {
    if (!node.IsMap()) fail(node, "configs", "each config must be a mapping");
    MGConfig c;
    c.label = scalar<std::string>(node, "label");
    c.kind = kind(node);
    c.lateral_offset_px = optional_scalar<int>(node, "offset").value_or(0);
    c.sprite_id = scalar<std::string>(node, "sprite");
    c.snow_intensity = optional_scalar<double>(node, "snow");
    if (node["metric"]) c.metric = metric(node, "metric");
    return c;
  }

  void expand_sweep(const YAML::Node& node, SMGSpec& spec) const {
    if (!node.IsMap()) fail(node, "sweep", "must be a mapping");
    const auto axis = scalar<std::string>(node, "axis");
    const auto from = scalar<double>(node, "from");
    const auto to = scalar<double>(node, "to");
    const auto partitions = scalar<int>(node, "partitions");
    if (partitions < 1) fail(node["partitions"], "partitions", "must be >= 1");
    const auto values = partition_range(from, to, partitions);

    MGConfig base;
    base.kind = kind(node);
    base.sprite_id = scalar<std::string>(node, "sprite");
    if (axis == "offset") {
      std::optional<MetricKind> left, right;
      if (node["left_metric"]) left = metric(node, "left_metric");
      if (node["right_metric"]) right = metric(node, "right_metric");
      for (double v : values) {
        MGConfig c = base;
        c.lateral_offset_px = static_cast<int>(std::lround(v));
        c.label = position_label(c.lateral_offset_px);
        if (c.lateral_offset_px < 0) c.metric = left;
        if (c.lateral_offset_px > 0) c.metric = right;
        spec.configs.push_back(std::move(c));
      }
    } else if (axis == "snow") {
      const auto prefix = optional_scalar<std::string>(node, "label_prefix").value_or("car");
      base.lateral_offset_px = optional_scalar<int>(node, "offset").value_or(0);
      for (double v : values) {
        MGConfig c = base;
        c.snow_intensity = v;
        c.label = prefix + "+snow:" + format_decimal(v);
        spec.configs.push_back(std::move(c));
      }
    } else {
      fail(node["axis"], "axis", "must be 'offset' or 'snow'");
    }
  }

  SMGSpec parse_spec(const YAML::Node& node) const {
    if (!node.IsMap()) fail(node, "smgs", "each SMG must be a mapping");
    SMGSpec spec;
    spec.name = scalar<std::string>(node, "name");
    spec.description = optional_scalar<std::string>(node, "description").value_or("");
    spec.metric_kind = node["metric"] ? metric(node, "metric") : MetricKind::Unchange;

    if (const YAML::Node configs = node["configs"]) {
      if (!configs.IsSequence()) fail(configs, "configs", "must be a list");
      for (const auto& c : configs) spec.configs.push_back(parse_config(c));
    }
    if (const YAML::Node sweep = node["sweep"]) expand_sweep(sweep, spec);

    if (node["reference"] && node["reference_index"])
      fail(node, "reference", "give either 'reference' or 'reference_index', not both");
    if (node["reference"]) {
      const auto label = scalar<std::string>(node, "reference");
      const auto idx = spec.index_of(label);
      if (!idx) throw InvalidSpec(spec.name + ": reference '" + label + "' names no config");
      spec.reference_index = *idx;
    } else if (node["reference_index"]) {
      const auto idx = scalar<long long>(node, "reference_index");
      if (idx < 0 || static_cast<std::size_t>(idx) >= spec.configs.size())
        throw InvalidSpec(spec.name + ": reference_index " + std::to_string(idx) + " out of range");
      spec.reference_index = static_cast<std::size_t>(idx);
    } else {
      fail(node, "reference", "is required");
    }

    spec.validate();
    return spec;
  }

  std::string origin_;
};

}  // namespace

SMGInstance generate_smg(const SMGSpec& spec, const SourceFrame& source, const TransformContext& ctx) {
  SMGInstance inst{spec, source, {}};
  inst.groups.reserve(spec.configs.size());
  for (const auto& config : spec.configs) {
    try {
      inst.groups.push_back({source, generate_mg(ctx, source, config), config});
    } catch (const OutOfBounds& e) {
      rethrow_annotated(config.label, e);
    } catch (const MissingSprite& e) {
      rethrow_annotated(config.label, e);
    } catch (const IntensityOutOfRange& e) {
      rethrow_annotated(config.label, e);
    } catch (const InvalidValue& e) {
      rethrow_annotated(config.label, e);
    }
  }
  return inst;
}

std::vector<SMGSpec> parse_smg_specs(std::string_view yaml, std::string_view origin) {
  auto specs = SpecParser(origin).parse(yaml);
  for (std::size_t i = 0; i < specs.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (specs[i].name == specs[j].name) throw InvalidSpec("duplicate SMG name '" + specs[i].name + "'");
  return specs;
}

std::vector<SMGSpec> load_smg_specs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_smg_specs(ss.str(), path.string());
}

std::string_view default_smg_yaml() { return kDefaultYaml; }

std::vector<SMGSpec> default_smg_specs() { return parse_smg_specs(default_smg_yaml(), "<bundled>"); }

std::vector<double> partition_range(double lo, double hi, int partitions) {
  if (partitions < 1) throw InvalidValue("partitions must be >= 1");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(partitions) + 1);
  for (int i = 0; i <= partitions; ++i) out.push_back((lo * (partitions - i) + hi * i) / partitions);
  return out;
}

std::string position_label(int offset) {
  if (offset == 0) return "center";
  return offset < 0 ? "left-" + std::to_string(-offset) : "right-" + std::to_string(offset);
}

std::string format_decimal(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  if (std::isfinite(v) && s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

}  // namespace smart
