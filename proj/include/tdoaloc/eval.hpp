#pragma once

// Simulation sweeps behind `tdoaloc eval` and the acceptance suite.

#include <cstdint>
#include <vector>

#include "tdoaloc/geometry.hpp"
#include "tdoaloc/pipeline.hpp"
#include "tdoaloc/simulate.hpp"

namespace tdoaloc {

struct SceneStats {
  std::size_t frames = 0;
  std::size_t eligible_frames = 0;  // frames after noise warm-up
  std::size_t detections = 0;
  double mean_error_deg = 0.0;      // over detections, vs. direction from the array center
  std::vector<double> errors_deg;

  double detection_rate() const {
    return eligible_frames ? static_cast<double>(detections) / static_cast<double>(eligible_frames) : 0.0;
  }
};

// Renders `scene`, runs the locator over it and scores every detection.
SceneStats run_scene(const Scene& scene, const ArrayGeometry& geom, const LocatorConfig& cfg, double duration_s);

struct Table1Spec {
  double distance_m;
  double elevation_deg;
  double reported_error_deg;  // measured value in the original room
};

// The four (distance, elevation) configurations of the measured table.
const std::vector<Table1Spec>& table1_rows();

struct Table1Options {
  double snr_db = 15.0;
  double azimuth_step_deg = 30.0;
  double duration_s = 1.0;
  SignalKind kind = SignalKind::white;
  std::vector<Echo> echoes;
  std::uint64_t seed = 1;
};

struct Table1Result {
  Table1Spec spec;
  std::size_t scenes = 0;
  std::size_t detections = 0;
  std::size_t eligible_frames = 0;
  double mean_error_deg = 0.0;
};

// One row per table1_rows() entry, each averaged over an azimuth sweep.
// Scenes are evaluated in parallel; results do not depend on thread count.
std::vector<Table1Result> simulate_table1(const ArrayGeometry& geom, const LocatorConfig& cfg,
                                          const Table1Options& opts = {});

struct BenchResult {
  std::size_t frames = 0;
  double serial_fps = 0.0;
  double parallel_fps = 0.0;
  double realtime_fps = 0.0;  // fs / hop

  double serial_realtime_factor() const { return serial_fps / realtime_fps; }
  double parallel_realtime_factor() const { return parallel_fps / realtime_fps; }
};

// Times the full per-frame pipeline (framing included) on a rendered scene.
BenchResult benchmark_pipeline(const ArrayGeometry& geom, const LocatorConfig& cfg, double duration_s = 2.0);

}  // namespace tdoaloc
