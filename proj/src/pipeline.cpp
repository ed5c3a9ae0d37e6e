#include "smart/pipeline.hpp"

#include "smart/hash.hpp"
#include "smart/report_io.hpp"
#include "smart/smg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace smart {

std::size_t CurvedMask::curved_count() const {
  return static_cast<std::size_t>(std::count(curved.begin(), curved.end(), true));
}

double CurvedMask::curved_fraction() const {
  return curved.empty() ? 0.0 : static_cast<double>(curved_count()) / static_cast<double>(curved.size());
}

CurvedMask mask_curved(const std::vector<std::optional<SteeringAngle>>& ground_truth, double threshold) {
  CurvedMask mask;
  mask.curved.reserve(ground_truth.size());
  for (const auto& gt : ground_truth) {
    if (gt) {
      mask.ground_truth_available = true;
      mask.curved.push_back(std::abs(gt->value()) > threshold);
    } else {
      ++mask.frames_without_ground_truth;
      mask.curved.push_back(false);
    }
  }
  return mask;
}

CurvedMask mask_curved(const std::vector<SourceFrame>& corpus, double threshold) {
  std::vector<std::optional<SteeringAngle>> gt;
  gt.reserve(corpus.size());
  for (const auto& f : corpus) gt.push_back(f.ground_truth);
  return mask_curved(gt, threshold);
}

namespace {

std::optional<double> mean_of_defined(const std::vector<std::optional<double>>& xs) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& x : xs)
    if (x) {
      sum += *x;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

Rollup make_rollup(std::string name, const std::vector<const ConfigAggregate*>& members, std::size_t n_thetas) {
  Rollup r;
  r.name = std::move(name);
  for (const auto* m : members) r.members.push_back(m->label);
  for (std::size_t t = 0; t < n_thetas; ++t) {
    std::vector<std::optional<double>> rates;
    for (const auto* m : members) rates.push_back(m->ub[t].rate());
    r.ub_rate.push_back(mean_of_defined(rates));
  }
  std::vector<std::optional<double>> vr;
  for (const auto* m : members) vr.push_back(m->violations.rate());
  r.violation_rate = mean_of_defined(vr);
  return r;
}

}  // namespace

Aggregates aggregate(const SMGSpec& spec, const std::vector<FrameResult>& frames, const std::vector<double>& thetas,
                     bool include_curved) {
  Aggregates agg;
  agg.frames_total = frames.size();
  for (std::size_t i = 0; i < spec.configs.size(); ++i) {
    ConfigAggregate c;
    c.label = spec.configs[i].label;
    c.reference = i == spec.reference_index;
    c.lateral_offset_px = spec.configs[i].lateral_offset_px;
    c.ub.resize(thetas.size());
    agg.configs.push_back(std::move(c));
  }

  for (const auto& frame : frames) {
    if (frame.curved) ++agg.frames_curved;
    const bool counted = include_curved || !frame.curved;
    for (std::size_t i = 0; i < frame.cells.size() && i < agg.configs.size(); ++i) {
      const CellResult& cell = frame.cells[i];
      ConfigAggregate& c = agg.configs[i];
      if (!counted) {
        ++c.excluded_curved;
        continue;
      }
      // violations need only the source and follow-up outputs
      if (cell.mr_violation) {
        ++c.violations.evaluable;
        if (*cell.mr_violation) ++c.violations.hits;
      }
      if (!cell.evaluable()) {
        ++c.errors;
        continue;
      }
      for (std::size_t t = 0; t < thetas.size(); ++t) {
        ++c.ub[t].evaluable;
        if (cell.ub[t].u) ++c.ub[t].hits;
      }
    }
  }

  std::vector<const ConfigAggregate*> left, right, all;
  for (const auto& c : agg.configs) {
    if (c.reference) continue;
    all.push_back(&c);
    if (c.lateral_offset_px < 0) left.push_back(&c);
    if (c.lateral_offset_px > 0) right.push_back(&c);
  }
  if (!left.empty()) agg.left = make_rollup("left", left, thetas.size());
  if (!right.empty()) agg.right = make_rollup("right", right, thetas.size());
  agg.smg = make_rollup(spec.name, all, thetas.size());
  return agg;
}

std::vector<FrameObservations> RunReport::observations() const {
  std::vector<FrameObservations> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    FrameObservations o{f.frame_id, f.ground_truth, f.sa_s, {}};
    for (const auto& c : f.cells) o.follow_ups.push_back(c.sa_f);
    out.push_back(std::move(o));
  }
  return out;
}

std::size_t RunReport::error_cells() const {
  std::size_t n = 0;
  for (const auto& f : frames) {
    if (!f.sa_s.ok()) ++n;
    for (const auto& c : f.cells)
      if (!c.sa_f.ok()) ++n;
  }
  return n;
}

RunReport seal_report(const SMGSpec& spec, const SutDescriptor& sut, const RunSettings& settings,
                      std::vector<FrameObservations> observations) {
  spec.validate();
  for (double t : settings.thetas)
    if (!(t >= 0.0)) throw InvalidValue("theta must be >= 0");
  const ViolationParams violation(settings.kappa);

  std::sort(observations.begin(), observations.end(),
            [](const auto& a, const auto& b) { return a.frame_id < b.frame_id; });

  RunReport r;
  r.spec = spec;
  r.sut = sut;
  r.thetas = settings.thetas;
  r.kappa = settings.kappa;
  r.seed = settings.seed;
  r.include_curved = settings.include_curved;
  r.curved_threshold = settings.curved_threshold;
  r.ground_truth_reference = settings.ground_truth_reference;

  std::vector<std::optional<SteeringAngle>> gt;
  for (const auto& o : observations) gt.push_back(o.ground_truth);
  const CurvedMask mask = mask_curved(gt, settings.curved_threshold);
  r.ground_truth_available = mask.ground_truth_available;

  for (std::size_t fi = 0; fi < observations.size(); ++fi) {
    const auto& obs = observations[fi];
    if (obs.follow_ups.size() != spec.configs.size())
      throw InvalidValue("frame " + std::to_string(obs.frame_id) + " has " + std::to_string(obs.follow_ups.size()) +
                         " follow-ups, spec has " + std::to_string(spec.configs.size()));
    FrameResult fr;
    fr.frame_id = obs.frame_id;
    fr.ground_truth = obs.ground_truth;
    fr.sa_s = obs.source;
    fr.curved = mask.curved[fi];

    // SA* is the source output unless ground truth was requested.
    std::optional<SteeringAngle> sa_star = settings.ground_truth_reference ? obs.ground_truth : obs.source.sa;
    std::optional<double> ad_ref;
    const auto& ref_obs = obs.follow_ups[spec.reference_index];
    if (sa_star && ref_obs.ok()) ad_ref = angle_difference(*ref_obs.sa, *sa_star);

    for (std::size_t ci = 0; ci < spec.configs.size(); ++ci) {
      CellResult cell;
      cell.frame_id = obs.frame_id;
      cell.config_label = spec.configs[ci].label;
      cell.sa_f = obs.follow_ups[ci];
      if (obs.source.ok() && cell.sa_f.ok()) cell.mr_violation = mr_violated(*obs.source.sa, *cell.sa_f.sa, violation);
      if (sa_star && cell.sa_f.ok()) {
        cell.ad = angle_difference(*cell.sa_f.sa, *sa_star);
        if (ad_ref) {
          cell.ad_ref = ad_ref;
          for (double theta : settings.thetas)
            cell.ub.push_back(determine_ub(spec.metric_for(ci), *cell.ad, *ad_ref, theta));
        }
      }
      fr.cells.push_back(std::move(cell));
    }
    r.frames.push_back(std::move(fr));
  }

  r.aggregates = aggregate(spec, r.frames, r.thetas, r.include_curved);

  std::vector<std::pair<double, double>> pairs;
  for (const auto& f : r.frames)
    if (f.ground_truth && f.sa_s.ok()) pairs.emplace_back(f.sa_s.sa->value(), f.ground_truth->value());
  if (pairs.size() >= 2) {
    r.stats = model_stats(pairs);
    if (!r.stats->corr) r.stats_note = "correlation undefined (constant series)";
  } else {
    r.stats_note = mask.ground_truth_available ? "fewer than two frames with ground truth and a source angle"
                                               : "no ground truth in corpus; all frames treated as straight";
  }

  audit_report(r);
  return r;
}

void audit_report(const RunReport& report) {
  const auto& agg = report.aggregates;
  if (agg.configs.size() != report.spec.configs.size()) throw Error("audit: config count mismatch");
  for (std::size_t ci = 0; ci < agg.configs.size(); ++ci) {
    std::vector<RateCount> ub(report.thetas.size());
    RateCount viol;
    std::size_t errors = 0, excluded = 0;
    for (const auto& f : report.frames) {
      const auto& cell = f.cells.at(ci);
      if (f.curved && !report.include_curved) {
        ++excluded;
        continue;
      }
      if (cell.mr_violation) {
        viol.evaluable++;
        viol.hits += *cell.mr_violation ? 1 : 0;
      }
      if (!cell.evaluable()) {
        ++errors;
        continue;
      }
      for (std::size_t t = 0; t < ub.size(); ++t) {
        ub[t].evaluable++;
        ub[t].hits += cell.ub[t].u ? 1 : 0;
        if (cell.ub[t].u != (cell.ub[t].m > report.thetas[t])) throw Error("audit: Heaviside verdict mismatch");
      }
    }
    const auto& c = agg.configs[ci];
    if (c.ub != ub || c.violations != viol || c.errors != errors || c.excluded_curved != excluded)
      throw Error("audit: aggregate for '" + c.label + "' disagrees with recount");
    if (c.reference)
      for (const auto& r : c.ub)
        if (r.hits != 0) throw Error("audit: reference config reports undesirable behaviour");
  }
}

// --- execution ----------------------------------------------------------------

std::string run_fingerprint(const SMGSpec& spec, const SutDescriptor& sut, const RunSettings& settings,
                            const std::vector<SourceFrame>& corpus) {
  nlohmann::ordered_json j;
  j["spec"] = spec_to_json(spec);
  j["sut"] = sut_to_json(sut);
  j["thetas"] = settings.thetas;
  j["kappa"] = settings.kappa;
  j["seed"] = settings.seed;
  j["ground_truth_reference"] = settings.ground_truth_reference;
  std::string pixels;
  for (const auto& f : corpus) {
    pixels += std::to_string(f.frame_id) + ":";
    pixels += f.ground_truth ? format_decimal(f.ground_truth->value()) : std::string("-");
    pixels += ":";
    for (int c = 0; c < 3; ++c) {
      const auto& plane = f.image->channel(c);
      pixels.append(reinterpret_cast<const char*>(plane.data()), static_cast<std::size_t>(plane.size()));
    }
  }
  j["corpus"] = sha256_hex(pixels);
  return sha256_hex(j.dump());
}

namespace {

struct Journal {
  std::ofstream out;
  std::mutex mu;

  void append(const FrameObservations& obs) {
    std::lock_guard lock(mu);
    out << observations_to_json(obs).dump() << '\n' << std::flush;
  }
};

// Frames recorded under a matching fingerprint; anything unreadable is
// discarded, including a torn final line.
std::map<std::int64_t, FrameObservations> read_journal(const std::filesystem::path& path,
                                                       const std::string& fingerprint, std::size_t n_configs) {
  std::map<std::int64_t, FrameObservations> done;
  std::ifstream in(path);
  if (!in) return done;
  std::string line;
  if (!std::getline(in, line)) return done;
  try {
    if (nlohmann::json::parse(line).at("fingerprint").get<std::string>() != fingerprint) return done;
  } catch (const std::exception&) {
    return done;
  }
  while (std::getline(in, line)) {
    try {
      auto obs = observations_from_json(nlohmann::json::parse(line));
      if (obs.follow_ups.size() == n_configs) done[obs.frame_id] = std::move(obs);
    } catch (const std::exception&) {
      break;
    }
  }
  return done;
}

Observation observe(SutLane& lane, std::int64_t frame_id, const std::string& label, const RgbImage& image) {
  Observation o;
  try {
    o.sa = lane.execute({frame_id, label, &image});
  } catch (const SutError& e) {
    o.error = e.what();
  } catch (const InvalidValue& e) {
    o.error = e.what();
  }
  return o;
}

FrameObservations execute_frame(const SMGSpec& spec, const SourceFrame& frame, const TransformContext& ctx,
                                SutLane& lane) {
  FrameObservations obs;
  obs.frame_id = frame.frame_id;
  obs.ground_truth = frame.ground_truth;
  obs.source = observe(lane, frame.frame_id, std::string(kSourceLabel), *frame.image);
  for (const auto& config : spec.configs) {
    RgbImage follow_up;
    try {
      follow_up = generate_mg(ctx, frame, config);
    } catch (const Error& e) {
      obs.follow_ups.push_back({std::nullopt, "transform: " + std::string(e.what())});
      continue;
    }
    obs.follow_ups.push_back(observe(lane, frame.frame_id, config.label, follow_up));
  }
  return obs;
}

}  // namespace

RunReport run_testing(const SMGSpec& spec, const std::vector<SourceFrame>& corpus, const SutDescriptor& sut,
                      const ModelFactory& factory, const RunOptions& options) {
  spec.validate();
  validate_corpus(corpus);
  if (!options.transform.sprites) throw MissingSprite("no sprite library loaded");

  TransformContext ctx = options.transform;
  ctx.seed = options.settings.seed;

  const std::string fingerprint = run_fingerprint(spec, sut, options.settings, corpus);
  std::map<std::int64_t, FrameObservations> done;
  if (options.journal && options.resume) done = read_journal(*options.journal, fingerprint, spec.configs.size());

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (!done.count(corpus[i].frame_id)) todo.push_back(i);

  const std::size_t n_lanes =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(1, options.lanes)),
                                                     std::max<std::size_t>(1, todo.size())));
  std::vector<std::unique_ptr<SutLane>> lanes;
  for (std::size_t l = 0; l < n_lanes; ++l) {
    auto lane = std::make_unique<SutLane>(factory(), sut.clamp_policy);
    try {
      lane->open();
    } catch (const SutUnreachable&) {
      throw;
    } catch (const Error& e) {
      throw SutUnreachable(e.what());
    }
    lanes.push_back(std::move(lane));
  }

  Journal journal;
  if (options.journal) {
    std::filesystem::create_directories(options.journal->parent_path().empty() ? "."
                                                                               : options.journal->parent_path());
    // Rewrite header plus surviving frames so the journal stays consistent.
    journal.out.open(*options.journal, std::ios::trunc);
    if (!journal.out) throw Error("cannot write journal " + options.journal->string());
    nlohmann::ordered_json header;
    header["fingerprint"] = fingerprint;
    journal.out << header.dump() << '\n';
    for (const auto& [_, obs] : done) journal.out << observations_to_json(obs).dump() << '\n';
    journal.out.flush();
  }

  std::vector<std::optional<FrameObservations>> results(corpus.size());
  std::atomic<std::size_t> executed{0};
  std::atomic<bool> stop{false};
  std::mutex error_mu;
  std::exception_ptr failure;

  // Contiguous shards keep each lane's request sequence in corpus order.
  auto run_lane = [&](std::size_t l) {
    const std::size_t begin = todo.size() * l / n_lanes;
    const std::size_t end = todo.size() * (l + 1) / n_lanes;
    try {
      for (std::size_t k = begin; k < end && !stop.load(); ++k) {
        const std::size_t idx = todo[k];
        auto obs = execute_frame(spec, corpus[idx], ctx, *lanes[l]);
        if (options.journal) journal.append(obs);
        results[idx] = std::move(obs);
        const std::size_t n = ++executed;
        if (options.stop_after_frames && n >= *options.stop_after_frames) stop = true;
      }
    } catch (...) {
      std::lock_guard lock(error_mu);
      if (!failure) failure = std::current_exception();
      stop = true;
    }
  };

  if (n_lanes == 1) {
    run_lane(0);
  } else {
    std::vector<std::jthread> workers;
    for (std::size_t l = 0; l < n_lanes; ++l) workers.emplace_back(run_lane, l);
  }
  if (failure) std::rethrow_exception(failure);
  if (options.stop_after_frames && executed.load() >= *options.stop_after_frames &&
      executed.load() < todo.size())
    throw RunInterrupted("run interrupted after " + std::to_string(executed.load()) + " frames");

  std::vector<FrameObservations> observations;
  observations.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (results[i]) {
      observations.push_back(std::move(*results[i]));
    } else {
      observations.push_back(done.at(corpus[i].frame_id));
    }
  }

  RunReport report = seal_report(spec, sut, options.settings, std::move(observations));
  for (const auto& lane : lanes) {
    report.latencies.insert(report.latencies.end(), lane->latencies().begin(), lane->latencies().end());
    report.clamped += lane->clamped_count();
  }
  return report;
}

RunReport run_testing(const SMGSpec& spec, const std::vector<SourceFrame>& corpus, const SutDescriptor& sut,
                      const RunOptions& options) {
  sut.validate();
  return run_testing(
      spec, corpus, sut, [&] { return make_model(sut, options.scratch_dir); }, options);
}

}  // namespace smart
