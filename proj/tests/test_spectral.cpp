#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tdoaloc/error.hpp"
#include "tdoaloc/spectral.hpp"

using namespace tdoaloc;

namespace {

Spectrum spectrum_of(const std::vector<double>& x) {
  const auto& fft = RealFft::get(x.size());
  Spectrum s(fft.bins());
  fft.forward(x, s);
  return s;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

// --- framing ----------------------------------------------------------------

TEST(FrameStream, FiftyPercentOverlapFrameCount) {
  std::vector<Signal> ch(2, Signal(4096, 0.25));
  FrameConfig cfg;
  const auto frames = frame_stream(ch, cfg);
  ASSERT_EQ(frames.size(), 7u);
  for (std::size_t f = 0; f < frames.size(); ++f) EXPECT_EQ(frames[f].start_sample, f * 512);
  EXPECT_EQ(frames.back().start_sample, 3072u);
}

TEST(FrameStream, ZeroInputGivesZeroSpectra) {
  std::vector<Signal> ch(3, Signal(3000, 0.0));
  for (const auto& frame : frame_stream(ch, FrameConfig{})) {
    ASSERT_EQ(frame.spectra.size(), 3u);
    for (const auto& s : frame.spectra)
      for (const auto& x : s) EXPECT_EQ(std::abs(x), 0.0);
  }
}

TEST(FrameStream, SpectrumMatchesDirectDft) {
  FrameConfig cfg;
  std::vector<Signal> ch{oracle::gaussian(2048, 11), oracle::gaussian(2048, 12)};
  const auto frames = frame_stream(ch, cfg);
  const auto taper = make_taper(Taper::hann, cfg.frame_size);
  for (std::size_t f : {std::size_t{0}, frames.size() - 1}) {
    for (std::size_t c = 0; c < 2; ++c) {
      std::vector<double> windowed(cfg.frame_size);
      for (std::size_t n = 0; n < cfg.frame_size; ++n)
        windowed[n] = ch[c][frames[f].start_sample + n] * taper[n];
      const auto ref = oracle::direct_dft(windowed);
      double scale = 0.0, dev = 0.0;
      for (std::size_t k = 0; k < ref.size(); ++k) {
        scale = std::max(scale, std::abs(ref[k]));
        dev = std::max(dev, std::abs(ref[k] - frames[f].spectra[c][k]));
      }
      EXPECT_LT(dev / scale, 1e-9);
    }
  }
}

TEST(FrameStream, RejectsBadInput) {
  FrameConfig cfg;
  std::vector<Signal> one(1, Signal(4096));
  EXPECT_THROW(frame_stream(one, cfg), InputError);
  std::vector<Signal> ragged{Signal(4096), Signal(4095)};
  EXPECT_THROW(frame_stream(ragged, cfg), InputError);
  cfg.frame_size = 1000;
  std::vector<Signal> ok(2, Signal(4096));
  EXPECT_THROW(frame_stream(ok, cfg), InputError);
  cfg.frame_size = 32;
  EXPECT_THROW(frame_stream(ok, cfg), InputError);
}

// --- plain correlation ------------------------------------------------------

TEST(CrossCorrPlainTime, ImpulseAutocorrelation) {
  std::vector<double> x(256, 0.0);
  x[0] = 1.0;
  const auto r = crosscorr_plain_time(x, x, 127);
  EXPECT_EQ(r.at(0), 1.0);
  for (int lag = -127; lag <= 127; ++lag)
    if (lag != 0) EXPECT_EQ(r.at(lag), 0.0);
}

TEST(CrossCorrPlainTime, ShiftedCopyPeaksAtShift) {
  const auto xj = oracle::gaussian(512, 3);
  const auto xi = oracle::rotate_delay(xj, 5);  // x_i lags x_j by 5
  const auto r = crosscorr_plain_time(xi, xj, 100);
  // Brute force over all lags.
  int best = 0;
  for (int lag = -100; lag <= 100; ++lag)
    if (r.at(lag) > r.at(best)) best = lag;
  EXPECT_EQ(best, 5);
  EXPECT_EQ(r.argmax(), 5);
}

TEST(CrossCorrPlainTime, IndependentNoiseHasNoDominantPeak) {
  for (std::uint64_t t = 0; t < 100; ++t) {
    const auto xi = oracle::gaussian(1024, 1000 + t);
    const auto xj = oracle::gaussian(1024, 5000 + t);
    const double auto_peak = crosscorr_plain_time(xi, xi, 0).at(0);
    const auto r = crosscorr_plain_time(xi, xj, 511);
    EXPECT_LT(max_abs(r.values), 0.5 * auto_peak) << "trial " << t;
  }
}

TEST(CrossCorrPlainTime, LengthMismatchThrows) {
  std::vector<double> a(64), b(65);
  EXPECT_THROW(crosscorr_plain_time(a, b, 10), InputError);
}

TEST(CrossCorrPlainFft, MatchesTimeDomain) {
  for (std::size_t n : {256u, 1024u, 2048u}) {
    for (std::uint64_t t = 0; t < 5; ++t) {
      const auto xi = oracle::gaussian(n, 10 * n + t);
      const auto xj = oracle::gaussian(n, 20 * n + t);
      const int lag = static_cast<int>(n / 2) - 1;
      const auto ref = crosscorr_plain_time(xi, xj, lag);
      const auto fft = crosscorr_plain_fft(spectrum_of(xi), spectrum_of(xj), lag);
      double dev = 0.0;
      for (std::size_t k = 0; k < ref.values.size(); ++k) dev = std::max(dev, std::abs(ref.values[k] - fft.values[k]));
      EXPECT_LT(dev / max_abs(ref.values), 1e-6);
    }
  }
}

TEST(CrossCorrPlainFft, AutocorrelationPeaksAtZero) {
  const auto x = oracle::gaussian(1024, 77);
  const auto s = spectrum_of(x);
  EXPECT_EQ(crosscorr_plain_fft(s, s, 200).argmax(), 0);
}

TEST(CrossCorrPlainFft, ZeroSpectrumGivesZero) {
  const auto s = spectrum_of(oracle::gaussian(1024, 78));
  const Spectrum zero(s.size());
  EXPECT_EQ(max_abs(crosscorr_plain_fft(s, zero, 200).values), 0.0);
}

TEST(CrossCorrPlainFft, MismatchThrows) {
  Spectrum a(513), b(257);
  EXPECT_THROW(crosscorr_plain_fft(a, b, 10), InputError);
}

// --- whitened ---------------------------------------------------------------

TEST(CrossCorrWhitened, NarrowerPeakThanPlainOnLowPassSignal) {
  const auto xj = oracle::lowpass(oracle::gaussian(1024, 21), 12);
  const auto xi = oracle::rotate_delay(xj, 5);
  const auto si = spectrum_of(xi);
  const auto sj = spectrum_of(xj);
  const auto plain = crosscorr_plain_fft(si, sj, 100);
  const auto white = crosscorr_whitened(si, sj, 0.0, 100);
  EXPECT_EQ(plain.argmax(), 5);
  EXPECT_EQ(white.argmax(), 5);
  EXPECT_LT(oracle::half_height_width(white.values), oracle::half_height_width(plain.values));
}

TEST(CrossCorrWhitened, NarrownessProperty) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> delay(-60, 60);
  std::uniform_int_distribution<int> taps(4, 24);
  for (int t = 0; t < 50; ++t) {
    const int d = delay(rng);
    const auto xj = oracle::lowpass(oracle::gaussian(1024, 300 + static_cast<std::uint64_t>(t)), taps(rng));
    const auto xi = oracle::rotate_delay(xj, d);
    const auto si = spectrum_of(xi);
    const auto sj = spectrum_of(xj);
    const auto plain = crosscorr_plain_fft(si, sj, 100);
    const auto white = crosscorr_whitened(si, sj, 0.0, 100);
    EXPECT_EQ(plain.argmax(), d);
    EXPECT_EQ(white.argmax(), d);
    EXPECT_LE(oracle::half_height_width(white.values), oracle::half_height_width(plain.values));
  }
}

TEST(CrossCorrWhitened, IdenticalSpectraSumToBinCount) {
  const auto s = spectrum_of(oracle::gaussian(1024, 5));
  const auto r = crosscorr_whitened(s, s, 0.0, 10);
  // Every one of the N terms is exactly 1 at lag 0.
  EXPECT_NEAR(r.at(0), 1024.0, 1e-9);
}

TEST(CrossCorrWhitened, ZeroSpectraAreSafe) {
  const Spectrum zero(513);
  const auto r = crosscorr_whitened(zero, zero, 0.0, 100);
  for (double v : r.values) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_EQ(v, 0.0);
  }
}

// --- noise estimate ---------------------------------------------------------

TEST(UpdateNoise, UnitRateCopiesInput) {
  auto st = NoiseState::with_bins(4);
  st.warmup_frames = 0;
  st.update_rate = 1.0;
  st.noise_psd = {5, 6, 7, 8};
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_EQ(update_noise(st, x).noise_psd, x);
}

TEST(UpdateNoise, GeometricConvergence) {
  auto st = NoiseState::with_bins(3);
  st.warmup_frames = 0;
  st.update_rate = 0.05;
  const std::vector<double> x{1.0, 2.0, 0.5};
  for (int t = 1; t <= 300; ++t) {
    st = update_noise(st, x);
    // Closed form from X_n(0) = 0: X (1 - (1 - lambda)^t).
    const double decay = std::pow(0.95, t);
    for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(st.noise_psd[k], x[k] * (1.0 - decay), 1e-12);
  }
  for (std::size_t k = 0; k < x.size(); ++k) EXPECT_LT(std::abs(st.noise_psd[k] - x[k]), 1e-6);
}

TEST(UpdateNoise, ZeroInputDecaysMonotonically) {
  auto st = NoiseState::with_bins(2);
  st.warmup_frames = 0;
  st.noise_psd = {3.0, 1.0};
  const std::vector<double> zero(2, 0.0);
  for (int t = 0; t < 200; ++t) {
    const auto next = update_noise(st, zero);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_LT(next.noise_psd[k], st.noise_psd[k]);
    st = next;
  }
  EXPECT_NEAR(st.noise_psd[0], 3.0 * std::pow(0.95, 200), 1e-12);
}

TEST(UpdateNoise, WarmupIsRunningMean) {
  auto st = NoiseState::with_bins(1);
  st.warmup_frames = 10;
  double sum = 0.0;
  for (int t = 1; t <= 10; ++t) {
    EXPECT_FALSE(st.warmed_up());
    st = update_noise(st, std::vector<double>{double(t)});
    sum += t;
    EXPECT_NEAR(st.noise_psd[0], sum / t, 1e-12);
  }
  EXPECT_TRUE(st.warmed_up());
}

TEST(UpdateNoise, NegativePowerThrows) {
  auto st = NoiseState::with_bins(2);
  EXPECT_THROW(update_noise(st, std::vector<double>{1.0, -1.0}), InputError);
}

// --- weights ----------------------------------------------------------------

namespace {

NoiseState state_with(double xn) {
  auto st = NoiseState::with_bins(1);
  st.noise_psd = {xn};
  st.alpha = 0.4;
  st.gamma = 0.3;
  return st;
}

}  // namespace

TEST(NoiseMaskWeight, ScalarCases) {
  const auto st = state_with(2.0);
  EXPECT_NEAR(noise_mask_weight(std::vector<double>{2.0}, st)[0], 0.6, 1e-12);
  EXPECT_NEAR(noise_mask_weight(std::vector<double>{0.2}, st)[0], 0.1, 1e-12);
  // (20 - 0.4 * 2) / 20
  EXPECT_NEAR(noise_mask_weight(std::vector<double>{20.0}, st)[0], 0.96, 1e-12);
  EXPECT_EQ(noise_mask_weight(std::vector<double>{0.0}, st)[0], 0.1);
}

TEST(EnhancedWeight, ScalarCases) {
  const auto st = state_with(2.0);
  auto we = [&](double x) {
    const std::vector<double> psd{x};
    return enhanced_weight(noise_mask_weight(psd, st), psd, st)[0];
  };
  EXPECT_NEAR(we(2.0), 0.6, 1e-12);
  EXPECT_NEAR(we(20.0), 0.96 * std::pow(10.0, 0.3), 1e-12);
  EXPECT_NEAR(we(20.0), 1.9155, 5e-5);
  const double w_half = noise_mask_weight(std::vector<double>{1.0}, st)[0];
  EXPECT_EQ(we(1.0), w_half);
}

TEST(EnhancedWeight, ZeroNoiseBinIsCapped) {
  auto st = state_with(0.0);
  const std::vector<double> psd{1.0};
  const auto w = noise_mask_weight(psd, st);
  EXPECT_EQ(w[0], 1.0);
  EXPECT_NEAR(enhanced_weight(w, psd, st)[0], std::pow(1e6, 0.3), 1e-9);
  const std::vector<double> silent{0.0};
  EXPECT_EQ(enhanced_weight(noise_mask_weight(silent, st), silent, st)[0], 0.1);
}

TEST(Weights, BoundsProperty) {
  std::mt19937_64 rng(5);
  std::lognormal_distribution<double> power(0.0, 2.0);
  auto st = NoiseState::with_bins(4096);
  std::vector<double> psd(4096);
  for (std::size_t k = 0; k < psd.size(); ++k) {
    st.noise_psd[k] = power(rng);
    psd[k] = k % 17 == 0 ? 0.0 : power(rng);
  }
  const auto w = noise_mask_weight(psd, st);
  const auto we = enhanced_weight(w, psd, st);
  for (std::size_t k = 0; k < psd.size(); ++k) {
    EXPECT_GE(w[k], 0.1);
    EXPECT_LE(w[k], 1.0);
    EXPECT_GE(we[k], w[k]);
    if (psd[k] <= st.noise_psd[k]) EXPECT_EQ(we[k], w[k]);
  }
}

// --- weighted correlation ---------------------------------------------------

TEST(CrossCorrWeighted, UnitWeightEqualsWhitened) {
  const auto si = spectrum_of(oracle::gaussian(1024, 40));
  const auto sj = spectrum_of(oracle::gaussian(1024, 41));
  const std::vector<double> ones(si.size(), 1.0);
  EXPECT_EQ(crosscorr_weighted(si, sj, ones, 1e-9, 300).values, crosscorr_whitened(si, sj, 1e-9, 300).values);
}

TEST(CrossCorrWeighted, ZeroWeightGivesZero) {
  const auto si = spectrum_of(oracle::gaussian(1024, 42));
  const auto sj = spectrum_of(oracle::gaussian(1024, 43));
  const std::vector<double> zeros(si.size(), 0.0);
  EXPECT_EQ(max_abs(crosscorr_weighted(si, sj, zeros, 0.0, 300).values), 0.0);
}

TEST(CrossCorrWeighted, ShapeMismatchThrows) {
  Spectrum s(513);
  std::vector<double> w(100, 1.0);
  EXPECT_THROW(crosscorr_weighted(s, s, w, 0.0, 10), InputError);
}

namespace {

// Upper half of the band only.
std::vector<double> highband_noise(std::size_t n, std::uint64_t seed) {
  auto x = oracle::gaussian(n, seed);
  const auto& fft = RealFft::get(n);
  Spectrum s(fft.bins());
  fft.forward(x, s);
  for (std::size_t k = 0; k < s.size() / 2; ++k) s[k] = 0.0;
  fft.inverse(s, x);
  return x;
}

double rms(const std::vector<double>& x) {
  double a = 0.0;
  for (double v : x) a += v * v;
  return std::sqrt(a / static_cast<double>(x.size()));
}

// Peak at the true lag over the RMS of the correlation away from it.
double peak_to_background(const CrossCorrelation& r, int lag) {
  double acc = 0.0;
  int count = 0;
  for (int t = -r.max_lag; t <= r.max_lag; ++t)
    if (std::abs(t - lag) > 2) {
      acc += r.at(t) * r.at(t);
      ++count;
    }
  return r.at(lag) / std::sqrt(acc / count);
}

}  // namespace

TEST(CrossCorrWeighted, BeatsWhiteningWhenNoiseOccupiesHalfTheBand) {
  constexpr std::size_t n = 1024;
  constexpr int delay = 7;
  FrameConfig cfg;
  const auto taper = make_taper(cfg.window, n);
  auto frame_spectra = [&](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> wa(n), wb(n);
    for (std::size_t i = 0; i < n; ++i) {
      wa[i] = a[i] * taper[i];
      wb[i] = b[i] * taper[i];
    }
    return std::vector<Spectrum>{spectrum_of(wa), spectrum_of(wb)};
  };

  int wins = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    const auto seed = static_cast<std::uint64_t>(100 * t);
    // Train the noise estimate on noise-only frames.
    auto st = NoiseState::with_bins(n / 2 + 1);
    for (int f = 0; f < 30; ++f) {
      const auto spectra = frame_spectra(highband_noise(n, seed + 2 * f + 1), highband_noise(n, seed + 2 * f + 2));
      st = update_noise(st, mean_power_spectrum(spectra));
    }
    const auto src = oracle::gaussian(n, seed + 77);
    auto ni = highband_noise(n, seed + 91);
    auto nj = highband_noise(n, seed + 92);
    const double g = rms(src) / rms(ni);  // 0 dB overall
    std::vector<double> xi = oracle::rotate_delay(src, delay), xj = src;
    for (std::size_t i = 0; i < n; ++i) {
      xi[i] += g * ni[i];
      xj[i] += g * nj[i];
    }
    // Rescale the trained estimate to the noise level actually present.
    for (double& v : st.noise_psd) v *= g * g;
    const auto spectra = frame_spectra(xi, xj);
    const auto psd = mean_power_spectrum(spectra);
    const auto we = enhanced_weight(noise_mask_weight(psd, st), psd, st);
    const double eps = whitening_floor(psd);
    const auto weighted = crosscorr_weighted(spectra[0], spectra[1], we, eps, 100);
    const auto white = crosscorr_whitened(spectra[0], spectra[1], eps, 100);
    EXPECT_EQ(weighted.argmax(), delay);
    if (peak_to_background(weighted, delay) > peak_to_background(white, delay)) ++wins;
  }
  EXPECT_EQ(wins, trials);
}

TEST(CrossCorr, Deterministic) {
  const auto si = spectrum_of(oracle::gaussian(1024, 50));
  const auto sj = spectrum_of(oracle::gaussian(1024, 51));
  std::vector<double> w(si.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = 0.1 + 0.001 * static_cast<double>(k);
  const auto a = crosscorr_weighted(si, sj, w, 1e-12, 400);
  const auto b = crosscorr_weighted(si, sj, w, 1e-12, 400);
  EXPECT_EQ(a.values, b.values);
}
