#include "tdoaloc/spectral.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "tdoaloc/error.hpp"

namespace tdoaloc {

void FrameConfig::validate() const {
  if (frame_size < 64 || !std::has_single_bit(frame_size))
    throw InputError("frame size must be a power of two >= 64, got " + std::to_string(frame_size));
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) throw InputError("sample rate must be positive");
}

std::vector<double> make_taper(Taper taper, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (taper == Taper::hann) {
    // Periodic Hann: sums to a constant at 50% overlap.
    for (std::size_t i = 0; i < n; ++i)
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

std::size_t frame_count(std::size_t length, const FrameConfig& cfg) {
  if (length < cfg.frame_size) return 0;
  return (length - cfg.frame_size) / cfg.hop() + 1;
}

namespace {

void check_stream(std::span<const Signal> channels, const FrameConfig& cfg) {
  cfg.validate();
  if (channels.size() < 2) throw InputError("need >= 2 channels, got " + std::to_string(channels.size()));
  const std::size_t len = channels.front().size();
  for (const auto& ch : channels)
    if (ch.size() != len) throw InputError("channel length mismatch");
  if (len < cfg.frame_size) throw InputError("stream shorter than one frame");
}

}  // namespace

Frame make_frame(std::span<const Signal> channels, std::size_t index, const FrameConfig& cfg, bool parallel) {
  const std::size_t n = cfg.frame_size;
  const std::size_t start = index * cfg.hop();
  if (channels.empty() || start + n > channels.front().size()) throw InputError("frame index past end of stream");

  Frame frame;
  frame.index = index;
  frame.start_sample = start;
  frame.channels.resize(channels.size());
  frame.spectra.resize(channels.size());
  const auto& fft = RealFft::get(n);
  const auto taper = make_taper(cfg.window, n);
  const auto count = static_cast<std::ptrdiff_t>(channels.size());

#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t c = 0; c < count; ++c) {
    const auto& src = channels[static_cast<std::size_t>(c)];
    auto& block = frame.channels[static_cast<std::size_t>(c)];
    block.assign(src.begin() + static_cast<std::ptrdiff_t>(start),
                 src.begin() + static_cast<std::ptrdiff_t>(start + n));
    Signal windowed(n);
    for (std::size_t i = 0; i < n; ++i) windowed[i] = block[i] * taper[i];
    auto& spec = frame.spectra[static_cast<std::size_t>(c)];
    spec.resize(fft.bins());
    fft.forward(windowed, spec);
  }
  return frame;
}

std::vector<Frame> frame_stream(std::span<const Signal> channels, const FrameConfig& cfg) {
  check_stream(channels, cfg);
  const std::size_t count = frame_count(channels.front().size(), cfg);
  std::vector<Frame> frames;
  frames.reserve(count);
  for (std::size_t f = 0; f < count; ++f) frames.push_back(make_frame(channels, f, cfg));
  return frames;
}

// ---------------------------------------------------------------------------

int CrossCorrelation::argmax() const {
  const auto it = std::max_element(values.begin(), values.end());
  return lag_of(static_cast<std::size_t>(it - values.begin()));
}

namespace {

std::size_t frame_size_from_bins(std::size_t bins) {
  if (bins < 2) throw InputError("spectrum too short");
  return 2 * (bins - 1);
}

void check_lag(int max_lag, std::size_t n) {
  if (max_lag < 0 || static_cast<std::size_t>(max_lag) >= n / 2)
    throw InputError("max_lag must lie in [0, N/2)");
}

// Inverse transform of a half cross-spectrum, keeping lags -max_lag..max_lag.
CrossCorrelation lag_window(std::span<const Complex> cross, int max_lag, CorrelationKind kind, double scale) {
  const std::size_t n = frame_size_from_bins(cross.size());
  check_lag(max_lag, n);
  std::vector<double> full(n);
  RealFft::get(n).inverse(cross, full);

  CrossCorrelation out;
  out.kind = kind;
  out.max_lag = max_lag;
  out.values.resize(static_cast<std::size_t>(2 * max_lag + 1));
  const auto ni = static_cast<long>(n);
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    const auto idx = static_cast<std::size_t>(((lag % ni) + ni) % ni);
    out.values[static_cast<std::size_t>(lag + max_lag)] = full[idx] * scale;
  }
  return out;
}

void check_pair(std::span<const Complex> xi, std::span<const Complex> xj) {
  if (xi.size() != xj.size()) throw InputError("spectrum length mismatch");
}

}  // namespace

CrossCorrelation crosscorr_plain_time(std::span<const double> xi, std::span<const double> xj, int max_lag) {
  if (xi.size() != xj.size()) throw InputError("block length mismatch");
  const std::size_t n = xi.size();
  check_lag(max_lag, n);
  CrossCorrelation out;
  out.kind = CorrelationKind::plain;
  out.max_lag = max_lag;
  out.values.resize(static_cast<std::size_t>(2 * max_lag + 1));
  const auto ni = static_cast<long>(n);
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (long k = 0; k < ni; ++k) {
      const long m = (((k - lag) % ni) + ni) % ni;
      acc += xi[static_cast<std::size_t>(k)] * xj[static_cast<std::size_t>(m)];
    }
    out.values[static_cast<std::size_t>(lag + max_lag)] = acc;
  }
  return out;
}

CrossCorrelation crosscorr_plain_fft(std::span<const Complex> xi, std::span<const Complex> xj, int max_lag) {
  check_pair(xi, xj);
  std::vector<Complex> cross(xi.size());
  for (std::size_t k = 0; k < xi.size(); ++k) cross[k] = xi[k] * std::conj(xj[k]);
  const double n = static_cast<double>(frame_size_from_bins(xi.size()));
  return lag_window(cross, max_lag, CorrelationKind::plain, 1.0 / n);
}

CrossCorrelation crosscorr_whitened(std::span<const Complex> xi, std::span<const Complex> xj, double floor_eps,
                                    int max_lag) {
  check_pair(xi, xj);
  std::vector<Complex> cross(xi.size());
  for (std::size_t k = 0; k < xi.size(); ++k) {
    const double mag = std::abs(xi[k]) * std::abs(xj[k]);
    cross[k] = mag > floor_eps ? xi[k] * std::conj(xj[k]) / mag : Complex{};
  }
  return lag_window(cross, max_lag, CorrelationKind::whitened, 1.0);
}

CrossCorrelation crosscorr_weighted(std::span<const Complex> xi, std::span<const Complex> xj,
                                    std::span<const double> weight, double floor_eps, int max_lag) {
  check_pair(xi, xj);
  if (weight.size() != xi.size()) throw InputError("weight length does not match spectrum");
  std::vector<Complex> cross(xi.size());
  for (std::size_t k = 0; k < xi.size(); ++k) {
    const double mag = std::abs(xi[k]) * std::abs(xj[k]);
    cross[k] = mag > floor_eps ? weight[k] * weight[k] * (xi[k] * std::conj(xj[k]) / mag) : Complex{};
  }
  return lag_window(cross, max_lag, CorrelationKind::weighted, 1.0);
}

// ---------------------------------------------------------------------------

NoiseState NoiseState::with_bins(std::size_t bins) {
  NoiseState s;
  s.noise_psd.assign(bins, 0.0);
  return s;
}

void NoiseState::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  if (!(gamma > 0.0 && gamma < 1.0)) throw InputError("gamma must lie in (0, 1)");
  if (!(update_rate > 0.0 && update_rate <= 1.0)) throw InputError("noise update rate must lie in (0, 1]");
  for (double v : noise_psd)
    if (!(v >= 0.0)) throw InputError("noise estimate must be non-negative");
}

std::vector<double> mean_power_spectrum(std::span<const Spectrum> spectra) {
  if (spectra.empty()) return {};
  std::vector<double> psd(spectra.front().size(), 0.0);
  for (const auto& s : spectra) {
    if (s.size() != psd.size()) throw InputError("spectrum length mismatch");
    for (std::size_t k = 0; k < psd.size(); ++k) psd[k] += std::norm(s[k]);
  }
  const double inv = 1.0 / static_cast<double>(spectra.size());
  for (double& v : psd) v *= inv;
  return psd;
}

NoiseState update_noise(NoiseState state, std::span<const double> mean_psd) {
  if (mean_psd.size() != state.noise_psd.size()) throw InputError("noise update: bin count mismatch");
  for (double v : mean_psd)
    if (!(v >= 0.0)) throw InputError("noise update: negative input power");

  if (state.frames_seen < state.warmup_frames) {
    const double n = static_cast<double>(state.frames_seen);
    for (std::size_t k = 0; k < mean_psd.size(); ++k)
      state.noise_psd[k] = (n * state.noise_psd[k] + mean_psd[k]) / (n + 1.0);
  } else {
    const double lambda = state.update_rate;
    for (std::size_t k = 0; k < mean_psd.size(); ++k)
      state.noise_psd[k] = (1.0 - lambda) * state.noise_psd[k] + lambda * mean_psd[k];
  }
  ++state.frames_seen;
  return state;
}

std::vector<double> noise_mask_weight(std::span<const double> mean_psd, const NoiseState& state) {
  if (mean_psd.size() != state.noise_psd.size()) throw InputError("weight: bin count mismatch");
  std::vector<double> w(mean_psd.size(), kWeightFloor);
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double x = mean_psd[k];
    if (x > 0.0) w[k] = std::max(kWeightFloor, (x - state.alpha * state.noise_psd[k]) / x);
  }
  return w;
}

std::vector<double> enhanced_weight(std::span<const double> w, std::span<const double> mean_psd,
                                    const NoiseState& state) {
  if (w.size() != mean_psd.size() || w.size() != state.noise_psd.size())
    throw InputError("enhanced weight: bin count mismatch");
  std::vector<double> we(w.begin(), w.end());
  for (std::size_t k = 0; k < we.size(); ++k) {
    const double x = mean_psd[k];
    const double xn = state.noise_psd[k];
    if (x <= xn) continue;
    const double ratio = xn > 0.0 ? std::min(x / xn, kMaxEnhancementRatio) : kMaxEnhancementRatio;
    we[k] = w[k] * std::pow(ratio, state.gamma);
  }
  return we;
}

double whitening_floor(std::span<const double> mean_psd, double scale) {
  if (mean_psd.empty()) return 0.0;
  const double mean = std::accumulate(mean_psd.begin(), mean_psd.end(), 0.0) / static_cast<double>(mean_psd.size());
  return scale * mean;
}

}  // namespace tdoaloc
