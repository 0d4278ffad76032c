#include "tdoaloc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tdoaloc/error.hpp"

namespace tdoaloc {

void LocatorConfig::validate() const {
  frame.validate();
  NoiseState probe;
  probe.alpha = alpha;
  probe.gamma = gamma;
  probe.update_rate = noise_update_rate;
  probe.validate();
  if (max_peaks == 0) throw InputError("M (peaks per pair) must be positive");
  if (tolerance < 0) throw InputError("consistency tolerance must be >= 0");
  if (min_separation < 1) throw InputError("peak separation must be >= 1");
  if (!(gate_factor >= 0.0)) throw InputError("detection gate factor must be >= 0");
  if (!(floor_scale >= 0.0)) throw InputError("whitening floor scale must be >= 0");
}

DetectionRecord Detection::record() const {
  DetectionRecord r;
  r.time_s = time_s;
  r.azimuth_deg = direction.azimuth_deg;
  r.elevation_deg = direction.elevation_deg;
  r.u = direction.u;
  r.raw_norm = direction.raw_norm;
  r.score = direction.score;
  r.tdoas = tdoas.delays;
  return r;
}

namespace {

std::vector<std::pair<std::size_t, std::size_t>> all_pairs(std::size_t mics) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < mics; ++i)
    for (std::size_t j = i + 1; j < mics; ++j) pairs.emplace_back(i, j);
  return pairs;
}

double median_abs(std::span<const double> v) {
  std::vector<double> a(v.size());
  std::transform(v.begin(), v.end(), a.begin(), [](double x) { return std::abs(x); });
  if (a.empty()) return 0.0;
  const auto mid = a.begin() + static_cast<std::ptrdiff_t>(a.size() / 2);
  std::nth_element(a.begin(), mid, a.end());
  return *mid;
}

}  // namespace

std::vector<CrossCorrelation> pair_correlations(const Frame& frame, std::span<const double> weight, double floor_eps,
                                                const ArrayGeometry& geom, Execution exec) {
  if (frame.spectra.size() != geom.mic_count())
    throw InputError("frame has " + std::to_string(frame.spectra.size()) + " channels, geometry has " +
                     std::to_string(geom.mic_count()));
  const auto pairs = all_pairs(geom.mic_count());
  std::vector<CrossCorrelation> out(pairs.size());
  const auto count = static_cast<std::ptrdiff_t>(pairs.size());

#pragma omp parallel for schedule(static) if (exec == Execution::parallel)
  for (std::ptrdiff_t p = 0; p < count; ++p) {
    const auto [i, j] = pairs[static_cast<std::size_t>(p)];
    auto corr = crosscorr_weighted(frame.spectra[i], frame.spectra[j], weight, floor_eps, geom.max_lag(i, j));
    corr.pair = {i, j};
    out[static_cast<std::size_t>(p)] = std::move(corr);
  }
  return out;
}

// ---------------------------------------------------------------------------

Locator::Locator(ArrayGeometry geom, LocatorConfig cfg) : geom_(std::move(geom)), cfg_(cfg) {
  cfg_.validate();
  if (std::abs(cfg_.frame.sample_rate - geom_.sample_rate()) > 1e-9)
    throw InputError("locator: frame sample rate differs from the geometry's");
  for (std::size_t i = 0; i < geom_.mic_count(); ++i)
    for (std::size_t j = i + 1; j < geom_.mic_count(); ++j)
      if (static_cast<std::size_t>(geom_.max_lag(i, j)) >= cfg_.frame.frame_size / 2)
        throw InputError("locator: array aperture exceeds half a frame; use a larger frame size");

  noise_ = NoiseState::with_bins(cfg_.frame.bins());
  noise_.alpha = cfg_.alpha;
  noise_.gamma = cfg_.gamma;
  noise_.update_rate = cfg_.noise_update_rate;
  noise_.warmup_frames = cfg_.warmup_frames;
}

std::optional<Detection> Locator::process(const Frame& frame) {
  if (frame.spectra.size() != geom_.mic_count()) throw InputError("locator: channel count does not match geometry");
  if (frame.spectra.front().size() != cfg_.frame.bins()) throw InputError("locator: frame size mismatch");

  const auto psd = mean_power_spectrum(frame.spectra);
  const auto w = noise_mask_weight(psd, noise_);
  const auto we = enhanced_weight(w, psd, noise_);
  const bool warmed = noise_.warmed_up();
  noise_ = update_noise(std::move(noise_), psd);
  ++frames_;
  if (!warmed) return std::nullopt;

  const double floor_eps = whitening_floor(psd, cfg_.floor_scale);
  const auto corrs = pair_correlations(frame, we, floor_eps, geom_, cfg_.execution);

  PeakTable table(geom_.mic_count());
  std::vector<PeakList> lists(corrs.size());
  const auto count = static_cast<std::ptrdiff_t>(corrs.size());
#pragma omp parallel for schedule(static) if (cfg_.execution == Execution::parallel)
  for (std::ptrdiff_t p = 0; p < count; ++p)
    lists[static_cast<std::size_t>(p)] =
        extract_peaks(corrs[static_cast<std::size_t>(p)], cfg_.max_peaks, cfg_.min_separation);
  for (auto& l : lists) table.set(std::move(l));

  auto set = consistency_search(table, cfg_.tolerance);
  if (!set) return std::nullopt;
  set->frame_index = frame.index;

  // Reference pairs come first in PeakTable order.
  const std::size_t refs = geom_.mic_count() - 1;
  double background = 0.0;
  for (std::size_t p = 0; p < refs; ++p) background += median_abs(corrs[p].values);
  background /= static_cast<double>(refs);
  const double mean_peak = set->score / static_cast<double>(refs);
  if (!(mean_peak > cfg_.gate_factor * background)) return std::nullopt;

  Detection det;
  det.frame_index = frame.index;
  det.time_s = (static_cast<double>(frame.start_sample) + 0.5 * static_cast<double>(cfg_.frame.frame_size)) /
               cfg_.frame.sample_rate;
  det.tdoas = *set;
  try {
    det.direction = solve_direction(geom_, *set);
  } catch (const DegenerateDirection&) {
    return std::nullopt;
  }
  return det;
}

LocateResult locate(std::span<const Signal> channels, const ArrayGeometry& geom, const LocatorConfig& cfg) {
  if (channels.size() != geom.mic_count())
    throw InputError("recording has " + std::to_string(channels.size()) + " channels but the geometry has " +
                     std::to_string(geom.mic_count()) + " microphones");
  for (const auto& ch : channels)
    if (ch.size() != channels.front().size()) throw InputError("channel length mismatch");

  Locator locator(geom, cfg);
  LocateResult result;
  result.frames = frame_count(channels.front().size(), cfg.frame);
  const bool parallel = cfg.execution == Execution::parallel;
  double total_ms = 0.0;
  for (std::size_t f = 0; f < result.frames; ++f) {
    const auto t0 = std::chrono::steady_clock::now();
    const Frame frame = make_frame(channels, f, cfg.frame, parallel);
    auto det = locator.process(frame);
    total_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (det) result.detections.push_back(std::move(*det));
  }
  result.mean_frame_ms = result.frames ? total_ms / static_cast<double>(result.frames) : 0.0;
  return result;
}

}  // namespace tdoaloc
