#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tilewall/cluster/job.hpp"

namespace tw::bench {

struct Expectation {
  /// Measured median frame time within this relative distance of
  /// render_cost_sec + 8 * bytes / B (B = effective throttle bandwidth).
  std::optional<double> oracle_tolerance;
  /// Post-warmup geometry bytes per frame must not exceed this.
  std::optional<std::uint64_t> max_geometry_bytes;
};

struct Scenario {
  std::string name;
  /// Row label for the summary table (e.g. the scene size).
  std::string label;
  cluster::JobConfig config;
  std::uint32_t n_frames = 6;
  std::uint32_t warmup_frames = 1;
  /// Rotation per frame of the scripted drag, in normalized viewport units.
  float step = 0.02f;
  bool acceptance = false;
  Expectation expect;
};

/// Throws std::invalid_argument when n_frames < warmup_frames + 3 or the
/// config is unusable.
void validate(const Scenario& s);

struct FrameSample {
  double seconds = 0.0;
  std::vector<std::uint64_t> bytes_per_link;
  std::uint64_t geometry_bytes = 0;

  std::uint64_t bytes_total() const;
};

struct Measurement {
  std::string scenario;
  std::string label;
  double bandwidth_bits_per_sec = 0.0;
  double c_render = 0.0;
  std::uint32_t warmup_frames = 0;
  std::vector<FrameSample> frames;

  std::span<const FrameSample> measured() const;
  double median_seconds() const;
  double fps() const { return 1.0 / median_seconds(); }
  /// Median over measured frames of the total bytes per frame.
  double median_bytes() const;
  /// Mean over measured frames and links of the bytes per link.
  double mean_link_bytes() const;
  std::uint64_t max_geometry_bytes() const;
};

/// Closed-form frame time model.
inline double model_frame_seconds(double c_render, double bytes, double bits_per_sec) {
  return c_render + 8.0 * bytes / bits_per_sec;
}

/// Runs the job in-process: frame 0 with the initial camera, then one frame per
/// POINTER_MOVE of a rotate drag. Timestamps come from this thread.
Measurement run_scenario(const Scenario& s);

struct ModelFit {
  double c_render = 0.0;
  double effective_bandwidth = 0.0;
  /// (predicted - measured) / measured per point.
  std::vector<double> residuals;
  double max_abs_residual() const;
};

/// Least-squares line of frame time against bytes per frame.
/// Throws std::invalid_argument with fewer than 2 distinct sizes.
ModelFit fit_model(std::span<const double> bytes, std::span<const double> seconds);
ModelFit fit_model(std::span<const Measurement> ms);

struct SummaryCell {
  std::string label;
  double bandwidth_mbps = 0.0;
  double fps = 0.0;
};

/// One cell per measurement: label x bandwidth -> fps.
std::vector<SummaryCell> summarize(std::span<const Measurement> ms);

/// Frame rows: scenario,frame,seconds,bytes_total,geometry_bytes,link0..linkN.
std::string results_csv(std::span<const Measurement> ms);
/// label,bandwidth_mbps,fps
std::string summary_csv(std::span<const SummaryCell> cells);
/// Fixed-width table with labels as rows and bandwidths as columns.
std::string summary_table(std::span<const SummaryCell> cells);
/// Writes results_csv to `path` and summary_csv next to it (.summary.csv).
void emit_results(std::span<const Measurement> ms, const std::filesystem::path& path);
/// Parses results_csv back into measurements (frames only).
std::vector<Measurement> parse_results_csv(const std::string& csv);

/// Checks a measurement against its scenario's expectation; returns failures.
std::vector<std::string> check(const Scenario& s, const Measurement& m);

struct ScenarioFile {
  std::vector<Scenario> scenarios;
};

ScenarioFile parse_scenarios(const std::string& json_text);
ScenarioFile load_scenarios(const std::filesystem::path& path);

}  // namespace tw::bench
