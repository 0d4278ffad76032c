#include "tdoaloc/simulate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <random>

#include "tdoaloc/error.hpp"

namespace tdoaloc {

std::string to_string(SignalKind kind) {
  switch (kind) {
    case SignalKind::white: return "white";
    case SignalKind::speech_burst: return "speech";
    case SignalKind::tone: return "tone";
    case SignalKind::impulse: return "impulse";
  }
  return "white";
}

SignalKind parse_signal_kind(const std::string& name) {
  if (name == "white") return SignalKind::white;
  if (name == "speech" || name == "speech_burst") return SignalKind::speech_burst;
  if (name == "tone") return SignalKind::tone;
  if (name == "impulse") return SignalKind::impulse;
  throw InputError("unknown signal kind '" + name + "' (expected white, speech, tone or impulse)");
}

void Scene::validate(const ArrayGeometry& geom) const {
  if (!source_position.allFinite()) throw InputError("scene: source position must be finite");
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
    throw InputError("scene: SNR must be a number or +inf");
  if (!(sample_rate > 0.0)) throw InputError("scene: sample rate must be positive");
  if (std::abs(sample_rate - geom.sample_rate()) > 1e-9)
    throw InputError("scene: sample rate differs from the array geometry's");
  if (kind == SignalKind::tone && !(tone_hz > 0.0 && tone_hz < sample_rate / 2.0))
    throw InputError("scene: tone frequency must lie in (0, fs/2)");
  for (const auto& e : echoes) {
    if (!(e.attenuation > 0.0 && e.attenuation < 1.0)) throw InputError("scene: echo attenuation must lie in (0, 1)");
    if (!(e.delay_ms >= 0.0) || !std::isfinite(e.delay_ms)) throw InputError("scene: echo delay must be >= 0");
  }
  if (geom.contains(source_position)) throw InputError("scene: source lies inside the array hull");
}

namespace {

double rms(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return x.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(x.size()));
}

Signal white_noise(std::size_t length, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  Signal s(length);
  for (double& v : s) v = gauss(rng);
  return s;
}

}  // namespace

Signal make_source_signal(SignalKind kind, std::size_t length, double sample_rate, double tone_hz, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  switch (kind) {
    case SignalKind::white:
      return white_noise(length, rng);

    case SignalKind::tone: {
      std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
      const double phase = phase_dist(rng);
      Signal s(length);
      const double step = 2.0 * std::numbers::pi * tone_hz / sample_rate;
      for (std::size_t n = 0; n < length; ++n) s[n] = std::sqrt(2.0) * std::sin(step * static_cast<double>(n) + phase);
      return s;
    }

    case SignalKind::impulse: {
      Signal s(length, 0.0);
      if (length > 0) s[length / 4] = 1.0;
      return s;
    }

    case SignalKind::speech_burst: {
      // 300-4000 Hz noise, gated by a 4 Hz raised-sine envelope.
      Signal s = white_noise(length, rng);
      if (length >= 2) {
        const std::size_t n = length % 2 == 0 ? length : length - 1;
        const auto& fft = RealFft::get(n);
        Spectrum spec(fft.bins());
        fft.forward(std::span<const double>(s.data(), n), spec);
        const double bin_hz = sample_rate / static_cast<double>(n);
        for (std::size_t k = 0; k < spec.size(); ++k) {
          const double f = static_cast<double>(k) * bin_hz;
          if (f < 300.0 || f > 4000.0) spec[k] = 0.0;
        }
        fft.inverse(spec, std::span<double>(s.data(), n));
        if (n < length) s[n] = 0.0;
      }
      for (std::size_t i = 0; i < length; ++i) {
        const double t = static_cast<double>(i) / sample_rate;
        const double env = std::sin(2.0 * std::numbers::pi * 4.0 * t);
        s[i] *= env > 0.0 ? env * env : 0.0;
      }
      const double r = rms(s);
      if (r > 0.0)
        for (double& v : s) v /= r;
      return s;
    }
  }
  return Signal(length, 0.0);
}

Signal fractional_delay(std::span<const double> signal, double delay) {
  const std::size_t n = signal.size();
  if (!std::isfinite(delay) || !(std::abs(delay) < static_cast<double>(n) / 2.0))
    throw InputError("fractional_delay: |delay| must be below half the signal length");
  if (delay == std::round(delay)) {
    Signal out(signal.begin(), signal.end());
    const auto ni = static_cast<long>(n);
    const long shift = ((static_cast<long>(delay) % ni) + ni) % ni;
    std::rotate(out.begin(), out.end() - shift, out.end());
    return out;
  }

  const auto& fft = RealFft::get(n);
  Spectrum spec(fft.bins());
  fft.forward(signal, spec);
  const double nd = static_cast<double>(n);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double phase = -2.0 * std::numbers::pi * static_cast<double>(k) * delay / nd;
    spec[k] *= std::polar(1.0, phase);
  }
  if (n % 2 == 0) spec.back() = spec.back().real();  // Hermitian projection
  Signal out(n);
  fft.inverse(spec, out);
  for (double& v : out) v /= nd;
  return out;
}

Vec3 echo_image_position(const Scene& scene, const ArrayGeometry& geom, const Echo& echo) {
  const Vec3 rel = scene.source_position - geom.center();
  const double dist = rel.norm();
  Vec3 dir = rel / dist;
  dir.z() = -dir.z();
  const double path = dist + geom.speed_of_sound() * echo.delay_ms * 1e-3;
  return geom.center() + path * dir;
}

std::vector<Signal> render(const Scene& scene, const ArrayGeometry& geom, double duration_s) {
  scene.validate(geom);
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) throw InputError("render: duration must be positive");
  const double fs = geom.sample_rate();
  const double c = geom.speed_of_sound();
  const auto length = static_cast<std::size_t>(std::llround(duration_s * fs));
  if (length == 0) throw InputError("render: duration shorter than one sample");

  struct Emitter {
    Vec3 position;
    double gain;
  };
  std::vector<Emitter> emitters{{scene.source_position, 1.0}};
  for (const auto& e : scene.echoes) emitters.push_back({echo_image_position(scene, geom, e), e.attenuation});

  double max_delay = 0.0;
  for (const auto& em : emitters)
    for (const auto& p : geom.positions()) max_delay = std::max(max_delay, (em.position - p).norm() / c * fs);

  // The source is rendered periodically over a padded block so every output
  // sample sees a fully developed signal.
  const std::size_t padded = std::bit_ceil(std::max<std::size_t>(length, 2 * static_cast<std::size_t>(std::ceil(max_delay)) + 2));
  const Signal source = make_source_signal(scene.kind, padded, fs, scene.tone_hz, scene.seed);
  const double ref_distance = (scene.source_position - geom.center()).norm();

  std::vector<Signal> out(geom.mic_count(), Signal(length, 0.0));
  for (std::size_t m = 0; m < geom.mic_count(); ++m) {
    for (const auto& em : emitters) {
      const double dist = (em.position - geom.positions()[m]).norm();
      const Signal delayed = fractional_delay(source, dist / c * fs);
      const double gain = em.gain * ref_distance / dist;
      for (std::size_t n = 0; n < length; ++n) out[m][n] += gain * delayed[n];
    }
  }

  if (std::isfinite(scene.snr_db)) {
    const double signal_rms = rms(std::span<const double>(source.data(), length));
    const double sigma = signal_rms / std::pow(10.0, scene.snr_db / 20.0);
    for (std::size_t m = 0; m < out.size(); ++m) {
      std::mt19937_64 rng(scene.seed * 0x9E3779B97F4A7C15ULL + 0x1000 + m);
      std::normal_distribution<double> gauss(0.0, sigma);
      for (double& v : out[m]) v += gauss(rng);
    }
  }
  return out;
}

}  // namespace tdoaloc
