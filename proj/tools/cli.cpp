#include "cli.hpp"

#include "smart/corpus.hpp"
#include "smart/hash.hpp"
#include "smart/image_io.hpp"
#include "smart/report.hpp"
#include "smart/report_io.hpp"
#include "smart/smg.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <unistd.h>

namespace smart::cli {

namespace fs = std::filesystem;

namespace {

struct SpecSelection {
  std::string specs_file;  // empty: bundled
  std::string smg = "all";
};

struct RunArgs {
  std::string corpus;
  SpecSelection sel;
  std::string sut;
  std::string script;
  double gain = 1.0;
  std::vector<double> thetas = kDefaultThetas;
  double kappa = kDefaultKappa;
  std::string out = "smart-out";
  std::uint64_t seed = 0;
  int lanes = 1;
  bool include_curved = false;
  bool gt_reference = false;
  std::string sprites;
  int timeout_ms = 10000;
  std::string clamp_policy = "clamp";
  bool resume = false;
  std::size_t stop_after = 0;
};

struct RenderArgs {
  std::string report;
  std::vector<double> thetas;
  std::string out;
  std::size_t window = 50;
  double density = 0.5;
  int cell_width = 2;
  int cell_height = 12;
};

struct GenArgs {
  std::string corpus;
  SpecSelection sel;
  std::string out = "smart-gen";
  std::uint64_t seed = 0;
  std::string sprites;
  bool contact_sheet = false;
};

std::vector<SMGSpec> select_specs(const SpecSelection& sel) {
  auto specs = sel.specs_file.empty() ? default_smg_specs() : load_smg_specs(sel.specs_file);
  if (sel.smg == "all") return specs;
  for (auto& s : specs)
    if (s.name == sel.smg) return {std::move(s)};
  std::string known;
  for (const auto& s : specs) known += (known.empty() ? "" : ", ") + s.name;
  throw InvalidSpec("unknown SMG '" + sel.smg + "' (known: " + known + ")");
}

SpriteLibrary sprites_from(const std::string& manifest) {
  return manifest.empty() ? SpriteLibrary::builtin() : SpriteLibrary::load(manifest);
}

// One output directory per SMG when several are selected.
fs::path spec_dir(const fs::path& out, const SMGSpec& spec, std::size_t selected) {
  return selected > 1 ? out / spec.name : out;
}

std::string theta_tag(double theta) { return format_decimal(theta); }

void render_outputs(const RunReport& report, const fs::path& dir, const std::vector<double>& thetas,
                    const UbHeatmapOptions& options) {
  write_png(dir / "sa_heatmap.png", render_sa_heatmap(report, options.layout));
  for (double t : thetas) write_png(dir / ("ub_heatmap_" + theta_tag(t) + ".png"), render_ub_heatmap(report, t, options));
  const auto tables = render_tables(report);
  write_text(dir / "table.txt", tables.text);
  write_text(dir / "table.csv", tables.csv);
}

std::string corpus_hash(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string acc;
  for (const auto& f : files) acc += f.filename().string() + ' ' + sha256_file(f) + '\n';
  return sha256_hex(acc);
}

fs::path scratch_dir() {
  if (const char* env = std::getenv("SMART_SCRATCH"); env && *env) return env;
  return fs::temp_directory_path() / ("smart-scratch-" + std::to_string(::getpid()));
}

int cmd_run(const RunArgs& a, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  auto sut = SutDescriptor::parse(a.sut);
  if (!a.script.empty()) sut.script = a.script;
  sut.gain = a.gain;
  sut.timeout_ms = a.timeout_ms;
  sut.clamp_policy = a.clamp_policy == "reject" ? ClampPolicy::Reject : ClampPolicy::Clamp;
  sut.validate();

  const auto specs = select_specs(a.sel);
  const auto corpus = load_corpus(a.corpus);
  const auto sprites = sprites_from(a.sprites);

  RunOptions opts;
  opts.settings.thetas = a.thetas;
  opts.settings.kappa = a.kappa;
  opts.settings.seed = a.seed;
  opts.settings.include_curved = a.include_curved;
  opts.settings.ground_truth_reference = a.gt_reference;
  opts.transform.sprites = &sprites;
  opts.transform.seed = a.seed;
  opts.lanes = a.lanes;
  opts.scratch_dir = scratch_dir();
  opts.resume = a.resume;
  if (a.stop_after > 0) opts.stop_after_frames = a.stop_after;

  ManifestExtras extras;
  extras.command_line = argv;
  extras.inputs["corpus"] = a.corpus;
  extras.inputs["specs"] = a.sel.specs_file.empty() ? "bundled" : a.sel.specs_file;
  extras.inputs["sprites"] = a.sprites.empty() ? "builtin" : a.sprites;
  extras.input_hashes["corpus"] = corpus_hash(a.corpus);
  extras.input_hashes["specs"] =
      a.sel.specs_file.empty() ? sha256_hex(default_smg_yaml()) : sha256_file(a.sel.specs_file);
  if (sut.script) {
    extras.inputs["script"] = sut.script->string();
    extras.input_hashes["script"] = sha256_file(*sut.script);
  }
  if (!a.sprites.empty()) extras.input_hashes["sprites"] = sha256_file(a.sprites);

  UbHeatmapOptions heat;
  std::size_t error_cells = 0;
  for (const auto& spec : specs) {
    const fs::path dir = spec_dir(a.out, spec, specs.size());
    opts.journal = dir / "journal.jsonl";
    const auto report = run_testing(spec, corpus, sut, opts);
    write_run_outputs(report, dir, extras);
    render_outputs(report, dir, report.thetas, heat);
    error_cells += report.error_cells();
    out << render_tables(report).text;
    if (report.clamped > 0) err << spec.name << ": " << report.clamped << " out-of-range angles clamped\n";
    out << '\n';
  }
  std::error_code ec;
  fs::remove_all(opts.scratch_dir, ec);
  if (error_cells > 0) {
    err << error_cells << " cells had SUT or transform errors; see results.csv\n";
    return kCellErrors;
  }
  return kOk;
}

int cmd_render(const RenderArgs& a, std::ostream& out) {
  const auto report = read_report(a.report);
  const auto thetas = a.thetas.empty() ? report.thetas : a.thetas;
  for (double t : thetas)
    if (std::find(report.thetas.begin(), report.thetas.end(), t) == report.thetas.end())
      throw UnknownTheta("theta " + theta_tag(t) + " is not in the report");
  const fs::path dir = a.out.empty() ? fs::path(a.report) : fs::path(a.out);
  fs::create_directories(dir);
  UbHeatmapOptions heat;
  heat.layout = {a.cell_width, a.cell_height};
  heat.hotspot = {a.window, a.density};
  render_outputs(report, dir, thetas, heat);
  out << render_tables(report).text;
  return kOk;
}

RgbImage contact_sheet(const std::vector<std::vector<const RgbImage*>>& grid) {
  constexpr int gap = 2;
  const RgbImage& first = *grid.front().front();
  std::size_t cols = 0;
  for (const auto& row : grid) cols = std::max(cols, row.size());
  const int w = first.width(), h = first.height();
  RgbImage sheet(static_cast<int>(cols) * (w + gap) + gap, static_cast<int>(grid.size()) * (h + gap) + gap);
  for (int c = 0; c < 3; ++c) sheet.channel(c).setConstant(40);
  for (std::size_t r = 0; r < grid.size(); ++r)
    for (std::size_t k = 0; k < grid[r].size(); ++k) {
      if (!grid[r][k]) continue;
      const int x0 = gap + static_cast<int>(k) * (w + gap);
      const int y0 = gap + static_cast<int>(r) * (h + gap);
      for (int c = 0; c < 3; ++c) sheet.channel(c).block(y0, x0, h, w) = grid[r][k]->channel(c);
    }
  return sheet;
}

int cmd_gen(const GenArgs& a, std::ostream& out, std::ostream& err) {
  const auto specs = select_specs(a.sel);
  const auto corpus = load_corpus(a.corpus);
  const auto sprites = sprites_from(a.sprites);
  TransformContext ctx;
  ctx.sprites = &sprites;
  ctx.seed = a.seed;

  std::size_t written = 0, failed = 0;
  for (const auto& spec : specs) {
    const fs::path dir = spec_dir(a.out, spec, specs.size());
    fs::create_directories(dir);
    std::vector<std::vector<RgbImage>> images;
    for (const auto& frame : corpus) {
      auto& row = images.emplace_back();
      row.push_back(*frame.image);
      for (const auto& config : spec.configs) {
        try {
          RgbImage img = generate_mg(ctx, frame, config);
          write_png(dir / (std::to_string(frame.frame_id) + "_" + config.label + ".png"), img);
          row.push_back(std::move(img));
          ++written;
        } catch (const Error& e) {
          err << spec.name << " frame " << frame.frame_id << " config '" << config.label << "': " << e.what() << '\n';
          row.emplace_back();
          ++failed;
        }
      }
    }
    if (a.contact_sheet) {
      std::vector<std::vector<const RgbImage*>> grid;
      for (const auto& row : images) {
        auto& g = grid.emplace_back();
        for (const auto& img : row) g.push_back(img.empty() ? nullptr : &img);
      }
      write_png(dir / "contact_sheet.png", contact_sheet(grid));
    }
  }
  out << written << " follow-up images written to " << a.out << '\n';
  return failed > 0 ? kCellErrors : kOk;
}

void add_spec_flags(CLI::App* cmd, SpecSelection& sel) {
  cmd->add_option("--specs", sel.specs_file, "SMG specification YAML (default: bundled set)")->check(CLI::ExistingFile);
  cmd->add_option("--smg", sel.smg, "SMG name or 'all'")->capture_default_str();
}

}  // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Metamorphic testing harness for steering-angle models", "smart"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run SMGs against a steering model");
  run_cmd->add_option("--corpus", run.corpus, "Directory of PNG frames (optional frames.csv)")->required();
  add_spec_flags(run_cmd, run.sel);
  run_cmd->add_option("--sut", run.sut, "stub:NAME | proc:CMD | net:HOST:PORT")->required();
  run_cmd->add_option("--script", run.script, "Scripted stub table (JSON)")->check(CLI::ExistingFile);
  run_cmd->add_option("--gain", run.gain, "Brightness-centroid stub gain")->capture_default_str();
  run_cmd->add_option("--theta", run.thetas, "UB thresholds, comma separated")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  run_cmd->add_option("--kappa", run.kappa, "Violation tolerance")->check(CLI::Range(0.0, 2.0))->capture_default_str();
  run_cmd->add_option("--out", run.out, "Output directory")->capture_default_str();
  run_cmd->add_option("--seed", run.seed, "Transform seed")->capture_default_str();
  run_cmd->add_option("--lanes", run.lanes, "Parallel SUT lanes")->check(CLI::Range(1, 256))->capture_default_str();
  run_cmd->add_flag("--include-curved", run.include_curved, "Keep frames with |ground truth| > 0.2");
  run_cmd->add_flag("--gt-reference", run.gt_reference, "Use ground truth instead of the source output as SA*");
  run_cmd->add_option("--sprites", run.sprites, "Sprite manifest (JSON)")->check(CLI::ExistingFile);
  run_cmd->add_option("--timeout", run.timeout_ms, "External SUT timeout, ms")
      ->check(CLI::Range(1, 3600000))
      ->capture_default_str();
  run_cmd->add_option("--clamp-policy", run.clamp_policy, "Out-of-range angles")
      ->check(CLI::IsMember({"clamp", "reject"}))
      ->capture_default_str();
  run_cmd->add_flag("--resume", run.resume, "Skip frames already in the output journal");
  run_cmd->add_option("--stop-after", run.stop_after)->group("");

  RenderArgs render;
  auto* render_cmd = app.add_subcommand("render", "Render heatmaps and tables from a report");
  render_cmd->add_option("--report", render.report, "Output directory of a prior run")->required();
  render_cmd->add_option("--theta", render.thetas, "Thresholds to map (default: all in report)")->delimiter(',');
  render_cmd->add_option("--out", render.out, "Output directory (default: the report directory)");
  render_cmd->add_option("--window", render.window, "Hotspot window, frames")->check(CLI::PositiveNumber);
  render_cmd->add_option("--density", render.density, "Hotspot density threshold")->check(CLI::Range(0.0, 1.0));
  render_cmd->add_option("--cell-width", render.cell_width)->check(CLI::PositiveNumber);
  render_cmd->add_option("--cell-height", render.cell_height)->check(CLI::PositiveNumber);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Write follow-up images for manual inspection");
  gen_cmd->add_option("--corpus", gen.corpus, "Directory of PNG frames")->required();
  add_spec_flags(gen_cmd, gen.sel);
  gen_cmd->add_option("--out", gen.out, "Output directory")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Transform seed")->capture_default_str();
  gen_cmd->add_option("--sprites", gen.sprites, "Sprite manifest (JSON)")->check(CLI::ExistingFile);
  gen_cmd->add_flag("--contact-sheet", gen.contact_sheet, "Also write a tiled contact_sheet.png");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return kOk;
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    err << "error: " << e.what() << "\n\n" << (subs.empty() ? app.help() : subs.front()->help());
    return kFatal;
  }

  const std::vector<std::string> args(argv, argv + argc);
  try {
    if (run_cmd->parsed()) return cmd_run(run, args, out, err);
    if (render_cmd->parsed()) return cmd_render(render, out);
    return cmd_gen(gen, out, err);
  } catch (const RunInterrupted& e) {
    err << "interrupted: " << e.what() << " (rerun with --resume)\n";
    return kFatal;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFatal;
  }
}

}  // namespace smart::cli
