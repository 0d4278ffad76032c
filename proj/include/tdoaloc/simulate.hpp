#pragma once

// Synthetic multichannel recordings of a point source around an array.

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tdoaloc/geometry.hpp"
#include "tdoaloc/spectral.hpp"

namespace tdoaloc {

enum class SignalKind { white, speech_burst, tone, impulse };

std::string to_string(SignalKind kind);
SignalKind parse_signal_kind(const std::string& name);  // throws InputError

struct Echo {
  double delay_ms = 0.0;     // extra path delay relative to the direct sound
  double attenuation = 0.5;  // in (0, 1)
};

struct Scene {
  Vec3 source_position = Vec3(3.0, 0.0, 0.0);  // meters, array frame
  SignalKind kind = SignalKind::white;
  double tone_hz = 1000.0;
  double snr_db = std::numeric_limits<double>::infinity();
  std::vector<Echo> echoes;
  double sample_rate = 48000.0;
  std::uint64_t seed = 1;

  void validate(const ArrayGeometry& geom) const;
};

// Dry source waveform of `length` samples, peak-free and roughly unit RMS
// (impulse excepted).
Signal make_source_signal(SignalKind kind, std::size_t length, double sample_rate, double tone_hz,
                          std::uint64_t seed);

// Delays `signal` by `delay` (fractional) samples with a linear phase ramp
// applied in the frequency domain. Circular; integer delays are exact
// rotations. For even lengths the Nyquist bin is scaled by cos(pi * delay).
// Requires |delay| < size / 2.
Signal fractional_delay(std::span<const double> signal, double delay);

// Renders `duration` seconds at each microphone: the source fractionally
// delayed by its propagation time and scaled by 1/distance (unit gain at the
// array center), plus each echo as an image source, plus independent white
// noise at `snr_db` relative to the direct sound at the array center.
//
// An echo is modelled as a floor reflection: the image source lies in the
// source direction mirrored through the horizontal plane, pushed out so its
// path is `delay_ms` longer than the direct path.
std::vector<Signal> render(const Scene& scene, const ArrayGeometry& geom, double duration_s);

// Image-source position used for `echo`.
Vec3 echo_image_position(const Scene& scene, const ArrayGeometry& geom, const Echo& echo);

}  // namespace tdoaloc
