#include "tdoaloc/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "tdoaloc/error.hpp"

namespace tdoaloc {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}
std::uint16_t le16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

void put32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{char(v & 0xFF), char((v >> 8) & 0xFF), char((v >> 16) & 0xFF), char((v >> 24) & 0xFF)};
  out.write(b.data(), 4);
}
void put16(std::ostream& out, std::uint16_t v) {
  const std::array<char, 2> b{char(v & 0xFF), char((v >> 8) & 0xFF)};
  out.write(b.data(), 2);
}

void check_audio(const MultichannelAudio& audio) {
  if (audio.channels.empty()) throw InputError("wav: no channels to write");
  for (const auto& ch : audio.channels)
    if (ch.size() != audio.channels.front().size()) throw InputError("wav: channel length mismatch");
  if (!(audio.sample_rate > 0.0)) throw InputError("wav: sample rate must be positive");
}

void write_header(std::ostream& out, const MultichannelAudio& audio, std::uint16_t format, std::uint16_t bits) {
  const auto channels = static_cast<std::uint16_t>(audio.channels.size());
  const auto frames = static_cast<std::uint32_t>(audio.channels.front().size());
  const std::uint16_t block_align = channels * (bits / 8);
  const std::uint32_t data_bytes = frames * block_align;
  const auto rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate));
  out.write("RIFF", 4);
  put32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put32(out, 16);
  put16(out, format);
  put16(out, channels);
  put32(out, rate);
  put32(out, rate * block_align);
  put16(out, block_align);
  put16(out, bits);
  out.write("data", 4);
  put32(out, data_bytes);
}

}  // namespace

MultichannelAudio read_multichannel_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("wav: cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = "wav " + path.string() + ": ";
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw InputError(where + "not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) throw InputError(where + "truncated fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format = le16(f);
      channels = le16(f + 2);
      rate = le32(f + 4);
      block_align = le16(f + 12);
      bits = le16(f + 14);
      if (format == kFormatExtensible) {
        if (size < 40) throw InputError(where + "truncated extensible fmt chunk");
        format = le16(f + 24);  // first two bytes of the sub-format GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (body + size > bytes.size()) throw InputError(where + "truncated data chunk");
      data = bytes.data() + body;
      data_size = size;
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw InputError(where + "missing fmt chunk");
  if (!data) throw InputError(where + "missing data chunk");
  if (channels < 2) throw InputError(where + "need >= 2 channels, got " + std::to_string(channels));

  const bool pcm = format == kFormatPcm && (bits == 16 || bits == 24 || bits == 32);
  const bool flt = format == kFormatFloat && bits == 32;
  if (!pcm && !flt)
    throw InputError(where + "unsupported encoding (format " + std::to_string(format) + ", " + std::to_string(bits) +
                     " bits)");
  const std::size_t bytes_per_sample = bits / 8;
  if (block_align != channels * bytes_per_sample) throw InputError(where + "inconsistent block alignment");
  if (data_size % block_align != 0) throw InputError(where + "truncated sample frame");

  const std::size_t frames = data_size / block_align;
  MultichannelAudio audio;
  audio.sample_rate = rate;
  audio.channels.assign(channels, Signal(frames));
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* s = data + n * block_align + c * bytes_per_sample;
      double v = 0.0;
      if (flt) {
        float f;
        const std::uint32_t raw = le32(s);
        std::memcpy(&f, &raw, 4);
        v = f;
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(le16(s)) / 32768.0;
      } else if (bits == 24) {
        std::int32_t x = std::int32_t(s[0]) | (std::int32_t(s[1]) << 8) | (std::int32_t(s[2]) << 16);
        if (x & 0x800000) x -= 0x1000000;
        v = x / 8388608.0;
      } else {
        v = static_cast<std::int32_t>(le32(s)) / 2147483648.0;
      }
      audio.channels[c][n] = v;
    }
  }
  return audio;
}

void write_multichannel_wav(const std::filesystem::path& path, const MultichannelAudio& audio) {
  check_audio(audio);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("wav: cannot write " + path.string());
  write_header(out, audio, kFormatFloat, 32);
  const std::size_t frames = audio.channels.front().size();
  for (std::size_t n = 0; n < frames; ++n)
    for (const auto& ch : audio.channels) {
      const float f = static_cast<float>(ch[n]);
      std::uint32_t raw;
      std::memcpy(&raw, &f, 4);
      put32(out, raw);
    }
  if (!out) throw ProcessingError("wav: write failed for " + path.string());
}

void write_multichannel_wav_pcm16(const std::filesystem::path& path, const MultichannelAudio& audio) {
  check_audio(audio);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("wav: cannot write " + path.string());
  write_header(out, audio, kFormatPcm, 16);
  const std::size_t frames = audio.channels.front().size();
  for (std::size_t n = 0; n < frames; ++n)
    for (const auto& ch : audio.channels) {
      const double clipped = std::clamp(ch[n], -1.0, 32767.0 / 32768.0);
      put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(clipped * 32768.0))));
    }
  if (!out) throw ProcessingError("wav: write failed for " + path.string());
}

// ---------------------------------------------------------------------------

ArrayGeometry GeometryConfig::build(double default_c, double default_fs) const {
  return ArrayGeometry::build(positions, speed_of_sound.value_or(default_c), sample_rate.value_or(default_fs));
}

GeometryConfig parse_geometry_config(const std::string& text, const std::string& origin) {
  const std::string where = "geometry config " + origin + ": ";
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(where + "malformed JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw InputError(where + "top level must be an object");
  if (j.contains("units") && j["units"] != "m") throw InputError(where + "units must be \"m\"");
  if (!j.contains("microphones") || !j["microphones"].is_array())
    throw InputError(where + "missing \"microphones\" array");

  GeometryConfig cfg;
  std::size_t idx = 0;
  for (const auto& m : j["microphones"]) {
    if (!m.is_array() || m.size() != 3 || !m[0].is_number() || !m[1].is_number() || !m[2].is_number())
      throw InputError(where + "microphone " + std::to_string(idx) + " must be an [x, y, z] triple of numbers");
    cfg.positions.emplace_back(m[0].get<double>(), m[1].get<double>(), m[2].get<double>());
    ++idx;
  }
  auto number = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key)) return std::nullopt;
    if (!j[key].is_number()) throw InputError(where + "\"" + key + "\" must be a number");
    return j[key].get<double>();
  };
  cfg.speed_of_sound = number("speed_of_sound");
  cfg.sample_rate = number("sample_rate");

  try {
    (void)cfg.build();
  } catch (const InputError& e) {
    throw InputError(where + e.what());
  }
  return cfg;
}

GeometryConfig read_geometry_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("geometry config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_geometry_config(ss.str(), path.string());
}

std::string format_geometry_config(const GeometryConfig& cfg) {
  nlohmann::json j;
  j["units"] = "m";
  j["microphones"] = nlohmann::json::array();
  for (const auto& p : cfg.positions) j["microphones"].push_back({p.x(), p.y(), p.z()});
  if (cfg.speed_of_sound) j["speed_of_sound"] = *cfg.speed_of_sound;
  if (cfg.sample_rate) j["sample_rate"] = *cfg.sample_rate;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

std::string to_json_line(const DetectionRecord& rec) {
  nlohmann::ordered_json j;
  j["time_s"] = rec.time_s;
  j["azimuth_deg"] = rec.azimuth_deg;
  j["elevation_deg"] = rec.elevation_deg;
  j["u"] = {rec.u.x(), rec.u.y(), rec.u.z()};
  j["raw_norm"] = rec.raw_norm;
  j["score"] = rec.score;
  j["tdoas"] = rec.tdoas;
  return j.dump();
}

DetectionRecord parse_detection_line(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    DetectionRecord rec;
    rec.time_s = j.at("time_s").get<double>();
    rec.azimuth_deg = j.at("azimuth_deg").get<double>();
    rec.elevation_deg = j.at("elevation_deg").get<double>();
    const auto& u = j.at("u");
    rec.u = Vec3(u.at(0).get<double>(), u.at(1).get<double>(), u.at(2).get<double>());
    rec.raw_norm = j.at("raw_norm").get<double>();
    rec.score = j.at("score").get<double>();
    rec.tdoas = j.at("tdoas").get<std::vector<int>>();
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("detection record: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

CsvWriter::CsvWriter(std::ostream& out, std::vector<std::string> header) : out_(out), columns_(header.size()) {
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw ProcessingError("csv: row has wrong number of cells");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
}

std::string format_number(double v, int precision) {
  std::ostringstream ss;
  ss.precision(precision);
  ss << v;
  return ss.str();
}

}  // namespace tdoaloc
