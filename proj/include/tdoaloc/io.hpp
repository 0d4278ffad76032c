#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tdoaloc/geometry.hpp"
#include "tdoaloc/spectral.hpp"

namespace tdoaloc {

struct MultichannelAudio {
  double sample_rate = 0.0;
  std::vector<Signal> channels;
};

// PCM 16/24/32-bit integer or 32-bit IEEE float (WAVE_FORMAT_EXTENSIBLE
// accepted). Samples are scaled to [-1, 1]. Throws InputError on anything
// else, on truncation, and on fewer than 2 channels.
MultichannelAudio read_multichannel_wav(const std::filesystem::path& path);

// 32-bit float WAV. Samples are stored as float, so reading the file back
// yields exactly static_cast<float>(x) for every input sample.
void write_multichannel_wav(const std::filesystem::path& path, const MultichannelAudio& audio);

// 16-bit PCM, used by tests for the integer decode path.
void write_multichannel_wav_pcm16(const std::filesystem::path& path, const MultichannelAudio& audio);

// Geometry config (JSON):
//   {
//     "units": "m",
//     "microphones": [[x, y, z], ...],
//     "speed_of_sound": 343.0,   // optional
//     "sample_rate": 48000       // optional
//   }
struct GeometryConfig {
  std::vector<Vec3> positions;
  std::optional<double> speed_of_sound;
  std::optional<double> sample_rate;

  // Validates by building the geometry; throws InputError.
  ArrayGeometry build(double default_c = kDefaultSpeedOfSound, double default_fs = 48000.0) const;
};

GeometryConfig parse_geometry_config(const std::string& text, const std::string& origin = "<string>");
GeometryConfig read_geometry_config(const std::filesystem::path& path);
std::string format_geometry_config(const GeometryConfig& cfg);

// One detection, serialized as a single JSON object per line.
struct DetectionRecord {
  double time_s = 0.0;
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  Vec3 u = Vec3::UnitX();
  double raw_norm = 0.0;
  double score = 0.0;
  std::vector<int> tdoas;
};

std::string to_json_line(const DetectionRecord& rec);
DetectionRecord parse_detection_line(const std::string& line);

// Minimal CSV writer: header row, then rows of already formatted cells.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> header);
  void row(const std::vector<std::string>& cells);

 private:
  std::ostream& out_;
  std::size_t columns_;
};

std::string format_number(double v, int precision = 6);

}  // namespace tdoaloc
