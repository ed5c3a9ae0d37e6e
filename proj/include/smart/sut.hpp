#pragma once

#include "smart/core_types.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace smart {

enum class SutKind { InProcessStub, ChildProcess, Network };
enum class ClampPolicy { Clamp, Reject };

std::string_view to_string(SutKind k);
std::string_view to_string(ClampPolicy p);

struct SutDescriptor {
  SutKind kind = SutKind::InProcessStub;
  std::string target;  // stub name, command line, or host:port
  int timeout_ms = 10000;
  ClampPolicy clamp_policy = ClampPolicy::Clamp;
  // Stub parameters.
  std::optional<std::filesystem::path> script;  // scripted
  double gain = 1.0;                            // brightness-centroid

  void validate() const;
  /// "stub:NAME", "proc:COMMAND ARGS", or "net:HOST:PORT".
  static SutDescriptor parse(std::string_view spec);
  std::string to_spec() const;
};

/// Label used for the source image of each frame.
inline constexpr std::string_view kSourceLabel = "source";

struct ExecutionRequest {
  std::int64_t frame_id = 0;
  std::string config_label;
  const RgbImage* image = nullptr;
};

/// A steering-angle predictor. Implementations return the raw angle; range
/// handling belongs to SutLane.
class SteeringModel {
 public:
  virtual ~SteeringModel() = default;
  virtual std::string name() const = 0;
  /// Brings the model up (spawn, connect). Throws SutUnreachable.
  virtual void open() {}
  virtual double predict(const ExecutionRequest& request) = 0;
};

class ConstantZeroStub final : public SteeringModel {
 public:
  std::string name() const override { return "constant-zero"; }
  double predict(const ExecutionRequest&) override { return 0.0; }
};

/// Replays angles keyed by (frame_id, config label).
class ScriptedStub final : public SteeringModel {
 public:
  using Key = std::pair<std::int64_t, std::string>;

  explicit ScriptedStub(std::map<Key, double> table, std::optional<double> fallback = std::nullopt)
      : table_(std::move(table)), fallback_(fallback) {}

  /// JSON: {"entries":[{"frame_id":0,"config":"source","sa":0.02},...],
  ///        "default": <optional number>}
  static ScriptedStub load(const std::filesystem::path& path);
  static ScriptedStub parse(std::string_view json_text);

  std::string name() const override { return "scripted"; }
  double predict(const ExecutionRequest& request) override;

 private:
  std::map<Key, double> table_;
  std::optional<double> fallback_;
};

/// gain * (luminance column centroid - W/2) / (W/2). Uniform and all-black
/// images give 0.
class BrightnessCentroidStub final : public SteeringModel {
 public:
  explicit BrightnessCentroidStub(double gain = 1.0) : gain_(gain) {}
  std::string name() const override { return "brightness-centroid"; }
  double predict(const ExecutionRequest& request) override;

 private:
  double gain_;
};

double brightness_centroid_angle(const RgbImage& image, double gain);

/// Adapter options shared by the external adapters.
struct ExternalOptions {
  std::filesystem::path scratch_dir;
  std::chrono::milliseconds timeout{10000};
};

/// Scratch file for a (frame, config) pair: <sha256 prefix>.png.
std::filesystem::path scratch_path(const std::filesystem::path& dir, std::int64_t frame_id, std::string_view label);
std::string request_id(std::int64_t frame_id, std::string_view label);

/// Child process speaking the JSON-lines protocol on stdin/stdout. The
/// command is split on whitespace (double quotes group) and exec'd directly.
/// A crashed or timed-out child is respawned on the next request.
class ChildProcessModel final : public SteeringModel {
 public:
  ChildProcessModel(std::string command, ExternalOptions options);
  ~ChildProcessModel() override;
  ChildProcessModel(const ChildProcessModel&) = delete;
  ChildProcessModel& operator=(const ChildProcessModel&) = delete;

  std::string name() const override { return "proc:" + command_; }
  void open() override;
  double predict(const ExecutionRequest& request) override;

 private:
  struct Impl;
  std::string command_;
  ExternalOptions options_;
  std::unique_ptr<Impl> impl_;
};

/// TCP connection speaking the JSON-lines protocol. Reconnects after errors.
class NetworkModel final : public SteeringModel {
 public:
  NetworkModel(std::string host, int port, ExternalOptions options);
  ~NetworkModel() override;
  NetworkModel(const NetworkModel&) = delete;
  NetworkModel& operator=(const NetworkModel&) = delete;

  std::string name() const override;
  void open() override;
  double predict(const ExecutionRequest& request) override;

 private:
  struct Impl;
  std::string host_;
  int port_;
  ExternalOptions options_;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<SteeringModel> make_model(const SutDescriptor& descriptor,
                                          const std::filesystem::path& scratch_dir);

using ModelFactory = std::function<std::unique_ptr<SteeringModel>()>;

struct LatencyRecord {
  std::int64_t frame_id;
  std::string config_label;
  double ms;
};

/// One serial execution lane: a model, the clamp policy and a latency log.
class SutLane {
 public:
  SutLane(std::unique_ptr<SteeringModel> model, ClampPolicy policy);

  void open() { model_->open(); }
  /// Throws SutError subclasses; SutRejected for out-of-range under Reject.
  SteeringAngle execute(const ExecutionRequest& request);

  const std::vector<LatencyRecord>& latencies() const { return latencies_; }
  std::size_t clamped_count() const { return clamped_; }

 private:
  std::unique_ptr<SteeringModel> model_;
  ClampPolicy policy_;
  std::vector<LatencyRecord> latencies_;
  std::size_t clamped_ = 0;
};

}  // namespace smart
