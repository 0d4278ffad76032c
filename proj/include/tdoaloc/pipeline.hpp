#pragma once

// Frame-by-frame localization: spectra -> noise weights -> weighted
// cross-correlations -> peak lists -> consistency search -> direction.
//
// The per-pair correlation and peak-picking kernel has an OpenMP-parallel
// form and a serial reference form selected by `Execution`; both produce
// bit-identical results.

#include <chrono>
#include <optional>
#include <span>
#include <vector>

#include "tdoaloc/geometry.hpp"
#include "tdoaloc/io.hpp"
#include "tdoaloc/spectral.hpp"
#include "tdoaloc/tdoa.hpp"

namespace tdoaloc {

enum class Execution { serial, parallel };

struct LocatorConfig {
  FrameConfig frame;
  double alpha = 0.4;
  double gamma = 0.3;
  double noise_update_rate = 0.05;
  std::size_t warmup_frames = 10;
  std::size_t max_peaks = kDefaultMaxPeaks;
  int min_separation = kDefaultMinSeparation;
  int tolerance = kDefaultTolerance;
  // Accept a consistent set only if its mean peak value exceeds this factor
  // times the mean over reference pairs of median |R(tau)|.
  double gate_factor = 4.0;
  double floor_scale = 1e-12;
  Execution execution = Execution::parallel;

  void validate() const;
};

struct Detection {
  std::size_t frame_index = 0;
  double time_s = 0.0;  // frame center
  TdoaSet tdoas;
  DirectionEstimate direction;

  DetectionRecord record() const;
};

// Weighted cross-correlations for every pair (i < j), in PeakTable order.
// This is the data-parallel kernel.
std::vector<CrossCorrelation> pair_correlations(const Frame& frame, std::span<const double> weight, double floor_eps,
                                                const ArrayGeometry& geom, Execution exec);

class Locator {
 public:
  Locator(ArrayGeometry geom, LocatorConfig cfg);

  // Consumes frames in order; the noise estimate advances on every call.
  std::optional<Detection> process(const Frame& frame);

  const NoiseState& noise() const { return noise_; }
  const ArrayGeometry& geometry() const { return geom_; }
  const LocatorConfig& config() const { return cfg_; }
  std::size_t frames_processed() const { return frames_; }

 private:
  ArrayGeometry geom_;
  LocatorConfig cfg_;
  NoiseState noise_;
  std::size_t frames_ = 0;
};

struct LocateResult {
  std::vector<Detection> detections;
  std::size_t frames = 0;
  double mean_frame_ms = 0.0;
};

// Runs a Locator over a whole multichannel stream.
LocateResult locate(std::span<const Signal> channels, const ArrayGeometry& geom, const LocatorConfig& cfg);

}  // namespace tdoaloc
