#pragma once

// Framing, noise tracking, spectral weighting and the three cross-correlation
// estimators (plain, whitened, noise-weighted).
//
// Conventions
//  - Spectra hold the non-redundant half of the DFT of a real block:
//    N/2 + 1 bins, X(k) = sum_n x[n] e^{-i 2 pi k n / N}. Sums "over all N
//    bins" are evaluated through Hermitian symmetry.
//  - Lags are circular. R(tau) = sum_n x_i[n] x_j[(n - tau) mod N], so the
//    correlation peaks at tau = d when x_i is x_j delayed by d samples.

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "tdoaloc/fft.hpp"

namespace tdoaloc {

using Spectrum = std::vector<Complex>;
using Signal = std::vector<double>;

enum class Taper { hann, rectangular };

struct FrameConfig {
  static constexpr double kOverlap = 0.5;

  std::size_t frame_size = 1024;
  double sample_rate = 48000.0;
  Taper window = Taper::hann;

  std::size_t hop() const { return frame_size / 2; }
  std::size_t bins() const { return frame_size / 2 + 1; }

  // Throws InputError unless frame_size is a power of two >= 64 and the
  // sample rate is positive.
  void validate() const;
};

std::vector<double> make_taper(Taper taper, std::size_t n);

struct Frame {
  std::size_t index = 0;
  std::size_t start_sample = 0;
  std::vector<Signal> channels;   // raw (unwindowed) blocks, frame_size each
  std::vector<Spectrum> spectra;  // DFT of the windowed blocks, bins() each
};

// Number of full frames a stream of `length` samples yields.
std::size_t frame_count(std::size_t length, const FrameConfig& cfg);

// Cuts frame `index` out of `channels` and computes its spectra. When
// `parallel` is set the per-channel transforms run on the OpenMP team.
Frame make_frame(std::span<const Signal> channels, std::size_t index, const FrameConfig& cfg,
                 bool parallel = false);

// All full frames of the stream, advancing by frame_size / 2. A trailing
// partial block is dropped. Requires >= 2 channels of equal length
// >= frame_size.
std::vector<Frame> frame_stream(std::span<const Signal> channels, const FrameConfig& cfg);

// ---------------------------------------------------------------------------
// Cross-correlation

enum class CorrelationKind { plain, whitened, weighted };

struct CrossCorrelation {
  std::pair<std::size_t, std::size_t> pair{0, 0};
  int max_lag = 0;
  std::vector<double> values;  // lags -max_lag .. +max_lag
  CorrelationKind kind = CorrelationKind::plain;

  double at(int lag) const { return values.at(static_cast<std::size_t>(lag + max_lag)); }
  int lag_of(std::size_t idx) const { return static_cast<int>(idx) - max_lag; }
  int argmax() const;
};

// Direct O(N * lags) evaluation of the circular correlation. This is the
// reference the FFT path is checked against. max_lag < N / 2.
CrossCorrelation crosscorr_plain_time(std::span<const double> xi, std::span<const double> xj,
                                      int max_lag);

// Plain cross-correlation through the inverse FFT of the cross-spectrum,
// scaled by 1/N so it equals crosscorr_plain_time.
CrossCorrelation crosscorr_plain_fft(std::span<const Complex> xi, std::span<const Complex> xj,
                                     int max_lag);

// PHAT-whitened cross-correlation. Bins with |Xi||Xj| <= floor_eps
// contribute nothing. Unnormalized: identical spectra with no floored bins
// give N at lag 0.
CrossCorrelation crosscorr_whitened(std::span<const Complex> xi, std::span<const Complex> xj,
                                    double floor_eps, int max_lag);

// Whitened cross-correlation with bin k scaled by weight[k]^2.
CrossCorrelation crosscorr_weighted(std::span<const Complex> xi, std::span<const Complex> xj,
                                    std::span<const double> weight, double floor_eps, int max_lag);

// ---------------------------------------------------------------------------
// Noise estimate and spectral weighting

struct NoiseState {
  std::vector<double> noise_psd;  // one entry per bin
  double alpha = 0.4;
  double gamma = 0.3;
  double update_rate = 0.05;
  // During the first `warmup_frames` updates the estimate is the running mean
  // of everything seen so far instead of the recursive average.
  std::size_t warmup_frames = 10;
  std::size_t frames_seen = 0;

  static NoiseState with_bins(std::size_t bins);

  bool warmed_up() const { return frames_seen >= warmup_frames; }
  void validate() const;
};

// Mean of |X_i(k)|^2 over the microphones.
std::vector<double> mean_power_spectrum(std::span<const Spectrum> spectra);

// X_n <- (1 - lambda) X_n + lambda X, or the running mean during warm-up.
NoiseState update_noise(NoiseState state, std::span<const double> mean_psd);

inline constexpr double kWeightFloor = 0.1;
inline constexpr double kMaxEnhancementRatio = 1e6;

// w(k) = max(0.1, (X - alpha X_n) / X); zero-power bins get the floor.
std::vector<double> noise_mask_weight(std::span<const double> mean_psd, const NoiseState& state);

// w_e(k) = w(k) where X <= X_n, else w(k) (X / X_n)^gamma with the ratio
// capped at kMaxEnhancementRatio.
std::vector<double> enhanced_weight(std::span<const double> w, std::span<const double> mean_psd,
                                    const NoiseState& state);

// Whitening floor for a frame: scale * mean(X(k)).
double whitening_floor(std::span<const double> mean_psd, double scale = 1e-12);

}  // namespace tdoaloc
