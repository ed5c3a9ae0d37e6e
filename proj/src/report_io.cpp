#include "smart/report_io.hpp"

#include "smart/hash.hpp"
#include "smart/smg.hpp"

#include <fstream>
#include <sstream>

namespace smart {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

ordered_json spec_to_json(const SMGSpec& spec) {
  ordered_json j;
  j["name"] = spec.name;
  j["description"] = spec.description;
  j["metric"] = std::string(to_string(spec.metric_kind));
  j["reference_index"] = spec.reference_index;
  j["configs"] = ordered_json::array();
  for (const auto& c : spec.configs) {
    ordered_json cj;
    cj["label"] = c.label;
    cj["kind"] = std::string(to_string(c.kind));
    cj["offset"] = c.lateral_offset_px;
    cj["sprite"] = c.sprite_id;
    if (c.snow_intensity) cj["snow"] = *c.snow_intensity;
    if (c.metric) cj["metric"] = std::string(to_string(*c.metric));
    j["configs"].push_back(std::move(cj));
  }
  return j;
}

SMGSpec spec_from_json(const json& j) {
  SMGSpec s;
  s.name = j.at("name").get<std::string>();
  s.description = j.value("description", "");
  s.metric_kind = parse_metric_kind(j.at("metric").get<std::string>());
  s.reference_index = j.at("reference_index").get<std::size_t>();
  for (const auto& cj : j.at("configs")) {
    MGConfig c;
    c.label = cj.at("label").get<std::string>();
    c.kind = parse_transform_kind(cj.at("kind").get<std::string>());
    c.lateral_offset_px = cj.at("offset").get<int>();
    c.sprite_id = cj.at("sprite").get<std::string>();
    if (cj.contains("snow")) c.snow_intensity = cj.at("snow").get<double>();
    if (cj.contains("metric")) c.metric = parse_metric_kind(cj.at("metric").get<std::string>());
    s.configs.push_back(std::move(c));
  }
  s.validate();
  return s;
}

ordered_json sut_to_json(const SutDescriptor& sut) {
  ordered_json j;
  j["kind"] = std::string(to_string(sut.kind));
  j["target"] = sut.target;
  j["timeout_ms"] = sut.timeout_ms;
  j["clamp_policy"] = std::string(to_string(sut.clamp_policy));
  if (sut.script) j["script"] = sut.script->string();
  j["gain"] = sut.gain;
  return j;
}

SutDescriptor sut_from_json(const json& j) {
  SutDescriptor d = SutDescriptor::parse(j.at("kind").get<std::string>() + ":" + j.at("target").get<std::string>());
  d.timeout_ms = j.at("timeout_ms").get<int>();
  d.clamp_policy = j.at("clamp_policy").get<std::string>() == "reject" ? ClampPolicy::Reject : ClampPolicy::Clamp;
  if (j.contains("script")) d.script = j.at("script").get<std::string>();
  d.gain = j.value("gain", 1.0);
  return d;
}

namespace {

ordered_json observation_json(const Observation& o) {
  ordered_json j;
  j["sa"] = o.sa ? ordered_json(o.sa->value()) : ordered_json(nullptr);
  if (o.error) j["error"] = *o.error;
  return j;
}

Observation observation_from(const json& j) {
  Observation o;
  if (!j.at("sa").is_null()) o.sa = SteeringAngle(j.at("sa").get<double>());
  if (j.contains("error")) o.error = j.at("error").get<std::string>();
  return o;
}

}  // namespace

ordered_json observations_to_json(const FrameObservations& f) {
  ordered_json j;
  j["frame_id"] = f.frame_id;
  j["ground_truth"] = f.ground_truth ? ordered_json(f.ground_truth->value()) : ordered_json(nullptr);
  j["source"] = observation_json(f.source);
  j["follow_ups"] = ordered_json::array();
  for (const auto& o : f.follow_ups) j["follow_ups"].push_back(observation_json(o));
  return j;
}

FrameObservations observations_from_json(const json& j) {
  FrameObservations f;
  f.frame_id = j.at("frame_id").get<std::int64_t>();
  if (!j.at("ground_truth").is_null()) f.ground_truth = SteeringAngle(j.at("ground_truth").get<double>());
  f.source = observation_from(j.at("source"));
  for (const auto& o : j.at("follow_ups")) f.follow_ups.push_back(observation_from(o));
  return f;
}

std::string theta_column(std::string_view prefix, double theta) {
  return std::string(prefix) + "@" + format_decimal(theta);
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

namespace {

std::string num(const std::optional<double>& v) { return v ? format_decimal(*v) : std::string(); }
std::string num(const std::optional<SteeringAngle>& v) {
  return v ? format_decimal(v->value()) : std::string();
}

}  // namespace

std::string results_csv(const RunReport& report) {
  std::ostringstream out;
  out << "frame_id,config,sa_s,sa_f,ad,ad_ref,m";
  for (double t : report.thetas) out << ',' << theta_column("u", t);
  out << ",violation,curved,error\r\n";
  for (const auto& f : report.frames) {
    for (const auto& c : f.cells) {
      out << f.frame_id << ',' << csv_field(c.config_label) << ',' << num(f.sa_s.sa) << ',' << num(c.sa_f.sa) << ','
          << num(c.ad) << ',' << num(c.ad_ref) << ',';
      if (c.evaluable()) out << format_decimal(c.ub.front().m);
      for (std::size_t t = 0; t < report.thetas.size(); ++t) {
        out << ',';
        if (c.evaluable()) out << (c.ub[t].u ? '1' : '0');
      }
      out << ',';
      if (c.mr_violation) out << (*c.mr_violation ? '1' : '0');
      out << ',' << (f.curved ? '1' : '0') << ',';
      std::string err;
      if (c.sa_f.error) err = *c.sa_f.error;
      else if (f.sa_s.error) err = "source: " + *f.sa_s.error;
      else if (!c.evaluable()) err = "reference unavailable";
      out << csv_field(err) << "\r\n";
    }
  }
  return out.str();
}

std::string aggregates_csv(const RunReport& report) {
  std::ostringstream out;
  out << "row,type";
  for (double t : report.thetas)
    out << ',' << theta_column("hits", t) << ',' << theta_column("evaluable", t) << ',' << theta_column("rate", t);
  out << ",violation_hits,violation_evaluable,violation_rate,errors,excluded_curved\r\n";

  const auto& agg = report.aggregates;
  auto rollup_row = [&](const Rollup& r, std::string_view type) {
    out << csv_field(r.name) << ',' << type;
    for (std::size_t t = 0; t < report.thetas.size(); ++t) out << ",,," << num(r.ub_rate[t]);
    out << ",,," << num(r.violation_rate) << ",,\r\n";
  };
  rollup_row(agg.smg, "smg");
  if (agg.left) rollup_row(*agg.left, "side");
  if (agg.right) rollup_row(*agg.right, "side");
  for (const auto& c : agg.configs) {
    out << csv_field(c.label) << ',' << (c.reference ? "reference" : "config");
    for (const auto& r : c.ub) out << ',' << r.hits << ',' << r.evaluable << ',' << num(r.rate());
    out << ',' << c.violations.hits << ',' << c.violations.evaluable << ',' << num(c.violations.rate()) << ','
        << c.errors << ',' << c.excluded_curved << "\r\n";
  }
  return out.str();
}

std::string latency_csv(const std::vector<LatencyRecord>& latencies) {
  std::ostringstream out;
  out << "frame_id,config,ms\r\n";
  for (const auto& l : latencies) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", l.ms);
    out << l.frame_id << ',' << csv_field(l.config_label) << ',' << buf << "\r\n";
  }
  return out.str();
}

ordered_json report_to_json(const RunReport& report) {
  ordered_json j;
  j["format"] = "smart-report/1";
  j["spec"] = spec_to_json(report.spec);
  j["sut"] = sut_to_json(report.sut);
  j["thetas"] = report.thetas;
  j["kappa"] = report.kappa;
  j["seed"] = report.seed;
  j["include_curved"] = report.include_curved;
  j["curved_threshold"] = report.curved_threshold;
  j["ground_truth_reference"] = report.ground_truth_reference;
  j["frames"] = ordered_json::array();
  for (const auto& o : report.observations()) j["frames"].push_back(observations_to_json(o));
  return j;
}

RunReport report_from_json(const json& j) {
  if (j.value("format", "") != "smart-report/1") throw ReportFormatError("not a smart report");
  RunSettings s;
  s.thetas = j.at("thetas").get<std::vector<double>>();
  s.kappa = j.at("kappa").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.include_curved = j.at("include_curved").get<bool>();
  s.curved_threshold = j.at("curved_threshold").get<double>();
  s.ground_truth_reference = j.value("ground_truth_reference", false);
  std::vector<FrameObservations> frames;
  for (const auto& f : j.at("frames")) frames.push_back(observations_from_json(f));
  return seal_report(spec_from_json(j.at("spec")), sut_from_json(j.at("sut")), s, std::move(frames));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("short write to " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

RunReport read_report(const std::filesystem::path& dir) {
  const auto path = dir / "report.json";
  if (!std::filesystem::exists(path)) throw ReportFormatError("no report.json in " + dir.string());
  try {
    return report_from_json(json::parse(read_text(path)));
  } catch (const ReportFormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw ReportFormatError("corrupt report " + path.string() + ": " + e.what());
  }
}

void write_run_outputs(const RunReport& report, const std::filesystem::path& dir, const ManifestExtras& extras) {
  std::filesystem::create_directories(dir);
  const std::string report_text = report_to_json(report).dump(1) + "\n";
  const std::string results = results_csv(report);
  const std::string aggregates = aggregates_csv(report);
  write_text(dir / "report.json", report_text);
  write_text(dir / "results.csv", results);
  write_text(dir / "aggregates.csv", aggregates);
  write_text(dir / "latency.csv", latency_csv(report.latencies));

  ordered_json m;
  m["tool"] = "smart";
  m["spec"] = spec_to_json(report.spec);
  m["sut"] = sut_to_json(report.sut);
  m["thetas"] = report.thetas;
  m["kappa"] = report.kappa;
  m["seed"] = report.seed;
  m["include_curved"] = report.include_curved;
  m["curved_threshold"] = report.curved_threshold;
  m["ground_truth_reference"] = report.ground_truth_reference;
  m["rollup"] = "unweighted mean of per-config rates";
  m["rate_denominator"] = "evaluable straight-road cells; SUT errors counted separately";
  m["frames"] = report.frames.size();
  m["error_cells"] = report.error_cells();
  m["clamped_angles"] = report.clamped;
  if (!report.ground_truth_available) m["note"] = "no ground truth: all frames treated as straight";
  if (report.stats) {
    ordered_json st;
    st["mae"] = report.stats->mae;
    st["rmse"] = report.stats->rmse;
    st["corr"] = report.stats->corr ? ordered_json(*report.stats->corr) : ordered_json(nullptr);
    st["stdev"] = report.stats->stdev;
    st["count"] = report.stats->count;
    m["model_stats"] = st;
  }
  if (!report.stats_note.empty()) m["model_stats_note"] = report.stats_note;
  m["inputs"] = extras.inputs;
  m["input_hashes"] = extras.input_hashes;
  m["command_line"] = extras.command_line;
  ordered_json hashes;
  hashes["report.json"] = sha256_hex(report_text);
  hashes["results.csv"] = sha256_hex(results);
  hashes["aggregates.csv"] = sha256_hex(aggregates);
  m["output_hashes"] = hashes;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

}  // namespace smart
