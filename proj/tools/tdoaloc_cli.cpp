// tdoaloc: locate sound sources in multichannel recordings, render synthetic
// scenes, and run the simulated evaluation sweeps.
//
// Exit codes: 0 success, 2 input error (bad flags, files, geometry), 3
// processing failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "tdoaloc/error.hpp"
#include "tdoaloc/eval.hpp"
#include "tdoaloc/io.hpp"
#include "tdoaloc/pipeline.hpp"
#include "tdoaloc/simulate.hpp"

namespace {

using namespace tdoaloc;
using json = nlohmann::ordered_json;

constexpr int kExitInput = 2;
constexpr int kExitProcessing = 3;
constexpr const char* kGeometryEnv = "TDOALOC_GEOMETRY";

// Every tunable, after defaults < config file < flags have been applied.
struct Settings {
  std::string geometry_path;  // empty: built-in 0.50 x 0.40 x 0.36 m prism
  std::string geometry_origin = "built-in prism";
  std::size_t frame_size = 1024;
  std::optional<double> sample_rate;  // unset: geometry file, then audio, then 48000
  std::optional<double> speed_of_sound;  // unset: geometry file, then 343
  double alpha = 0.4;
  double gamma = 0.3;
  double lambda = 0.05;
  std::size_t warmup_frames = 10;
  std::size_t peaks = kDefaultMaxPeaks;
  int min_separation = kDefaultMinSeparation;
  int tolerance = kDefaultTolerance;
  double gate = 4.0;
  std::uint64_t seed = 1;
  bool serial = false;
};

// Flag values; only those given on the command line override anything.
struct Flags {
  std::optional<std::string> geometry;
  std::optional<std::size_t> frame_size;
  std::optional<double> sample_rate;
  std::optional<double> speed_of_sound;
  std::optional<double> alpha;
  std::optional<double> gamma;
  std::optional<double> lambda;
  std::optional<std::size_t> warmup_frames;
  std::optional<std::size_t> peaks;
  std::optional<int> min_separation;
  std::optional<int> tolerance;
  std::optional<double> gate;
  std::optional<std::uint64_t> seed;
  bool serial = false;
  std::string config_path;
  bool show_config = false;
};

template <class T>
void take(const json& j, const char* key, T& out, const std::string& origin) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(origin + ": \"" + key + "\" has the wrong type");
  }
}

template <class T>
void take(const json& j, const char* key, std::optional<T>& out, const std::string& origin) {
  if (!j.contains(key)) return;
  T v{};
  take(j, key, v, origin);
  out = v;
}

void apply_config_file(Settings& s, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("config: cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": malformed JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw InputError(path + ": top level must be an object");
  static const std::vector<std::string> known{"geometry", "frame_size", "sample_rate", "speed_of_sound", "alpha",
                                              "gamma",    "lambda",     "warmup_frames", "peaks",        "min_separation",
                                              "tolerance", "gate",      "seed",          "serial"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw InputError(path + ": unknown key \"" + key + "\"");
  if (j.contains("geometry")) {
    take(j, "geometry", s.geometry_path, path);
    s.geometry_origin = path;
  }
  take(j, "frame_size", s.frame_size, path);
  take(j, "sample_rate", s.sample_rate, path);
  take(j, "speed_of_sound", s.speed_of_sound, path);
  take(j, "alpha", s.alpha, path);
  take(j, "gamma", s.gamma, path);
  take(j, "lambda", s.lambda, path);
  take(j, "warmup_frames", s.warmup_frames, path);
  take(j, "peaks", s.peaks, path);
  take(j, "min_separation", s.min_separation, path);
  take(j, "tolerance", s.tolerance, path);
  take(j, "gate", s.gate, path);
  take(j, "seed", s.seed, path);
  take(j, "serial", s.serial, path);
}

Settings resolve(const Flags& f) {
  Settings s;
  if (const char* env = std::getenv(kGeometryEnv); env && *env) {
    s.geometry_path = env;
    s.geometry_origin = std::string("$") + kGeometryEnv;
  }
  if (!f.config_path.empty()) apply_config_file(s, f.config_path);
  if (f.geometry) {
    s.geometry_path = *f.geometry;
    s.geometry_origin = "--geometry";
  }
  if (f.frame_size) s.frame_size = *f.frame_size;
  if (f.sample_rate) s.sample_rate = *f.sample_rate;
  if (f.speed_of_sound) s.speed_of_sound = *f.speed_of_sound;
  if (f.alpha) s.alpha = *f.alpha;
  if (f.gamma) s.gamma = *f.gamma;
  if (f.lambda) s.lambda = *f.lambda;
  if (f.warmup_frames) s.warmup_frames = *f.warmup_frames;
  if (f.peaks) s.peaks = *f.peaks;
  if (f.min_separation) s.min_separation = *f.min_separation;
  if (f.tolerance) s.tolerance = *f.tolerance;
  if (f.gate) s.gate = *f.gate;
  if (f.seed) s.seed = *f.seed;
  if (f.serial) s.serial = true;
  return s;
}

// The geometry file's own c / fs win over defaults but lose to flags and the
// config file; `fallback_fs` is used when nothing names a rate.
ArrayGeometry load_geometry(const Settings& s, double fallback_fs = 48000.0) {
  GeometryConfig cfg;
  if (s.geometry_path.empty()) {
    cfg.positions = prism_positions();
  } else {
    cfg = read_geometry_config(s.geometry_path);
  }
  const double c = s.speed_of_sound.value_or(cfg.speed_of_sound.value_or(kDefaultSpeedOfSound));
  const double fs = s.sample_rate.value_or(cfg.sample_rate.value_or(fallback_fs));
  return ArrayGeometry::build(cfg.positions, c, fs);
}

LocatorConfig locator_config(const Settings& s, double fs) {
  LocatorConfig cfg;
  cfg.frame.frame_size = s.frame_size;
  cfg.frame.sample_rate = fs;
  cfg.alpha = s.alpha;
  cfg.gamma = s.gamma;
  cfg.noise_update_rate = s.lambda;
  cfg.warmup_frames = s.warmup_frames;
  cfg.max_peaks = s.peaks;
  cfg.min_separation = s.min_separation;
  cfg.tolerance = s.tolerance;
  cfg.gate_factor = s.gate;
  cfg.execution = s.serial ? Execution::serial : Execution::parallel;
  cfg.validate();
  return cfg;
}

void show_config(const Settings& s, const ArrayGeometry& geom) {
  json j;
  j["geometry"] = s.geometry_path.empty() ? json(nullptr) : json(s.geometry_path);
  j["geometry_source"] = s.geometry_origin;
  j["microphones"] = geom.mic_count();
  j["speed_of_sound"] = geom.speed_of_sound();
  j["sample_rate"] = geom.sample_rate();
  j["frame_size"] = s.frame_size;
  j["hop"] = s.frame_size / 2;
  j["window"] = "hann";
  j["alpha"] = s.alpha;
  j["gamma"] = s.gamma;
  j["lambda"] = s.lambda;
  j["warmup_frames"] = s.warmup_frames;
  j["peaks"] = s.peaks;
  j["min_separation"] = s.min_separation;
  j["tolerance"] = s.tolerance;
  j["gate"] = s.gate;
  j["seed"] = s.seed;
  j["serial"] = s.serial;
  j["threads"] = omp_get_max_threads();
  std::cout << j.dump(2) << '\n';
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw InputError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }
  void finish() {
    stream().flush();
    if (!stream()) throw ProcessingError("output write failed");
  }

 private:
  std::ofstream file_;
};

// --- locate -----------------------------------------------------------------

struct LocateArgs {
  std::string audio;
  std::string output;
};

int run_locate(const Flags& flags, const LocateArgs& args) {
  const Settings s = resolve(flags);
  MultichannelAudio audio = read_multichannel_wav(args.audio);
  const ArrayGeometry geom = load_geometry(s, audio.sample_rate);
  if (flags.show_config) {
    show_config(s, geom);
    return 0;
  }
  if (std::abs(audio.sample_rate - geom.sample_rate()) > 1e-9)
    throw InputError(args.audio + ": sample rate " + format_number(audio.sample_rate) + " Hz, configuration expects " +
                     format_number(geom.sample_rate()) + " Hz");
  if (audio.channels.size() != geom.mic_count())
    throw InputError(args.audio + ": " + std::to_string(audio.channels.size()) + " channels, geometry (" +
                     s.geometry_origin + ") has " + std::to_string(geom.mic_count()) + " microphones");

  const auto cfg = locator_config(s, geom.sample_rate());
  LocateResult result;
  try {
    result = locate(audio.channels, geom, cfg);
  } catch (const InputError& e) {
    throw InputError(args.audio + ": " + e.what());
  }
  Output out(args.output);
  for (const auto& d : result.detections) out.stream() << to_json_line(d.record()) << '\n';
  out.finish();
  std::cerr << "frames=" << result.frames << " detections=" << result.detections.size()
            << " mean_frame_ms=" << format_number(result.mean_frame_ms, 4) << '\n';
  return 0;
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string output;
  std::string scene_file;
  std::optional<std::vector<double>> source;
  std::optional<double> distance;
  std::optional<double> azimuth;
  std::optional<double> elevation;
  std::optional<std::string> kind;
  std::optional<double> tone_hz;
  std::optional<double> snr_db;
  std::vector<std::string> echoes;
  std::optional<double> duration;
  bool pcm16 = false;
};

Echo parse_echo(const std::string& text) {
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument(text);
    return Echo{std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
  } catch (const std::logic_error&) {
    throw InputError("--echo expects DELAY_MS:ATTENUATION, got '" + text + "'");
  }
}

int run_simulate(const Flags& flags, const SimulateArgs& args) {
  const Settings s = resolve(flags);
  const ArrayGeometry geom = load_geometry(s);  // fails before any rendering
  if (flags.show_config) {
    show_config(s, geom);
    return 0;
  }

  Scene scene;
  scene.sample_rate = geom.sample_rate();
  scene.seed = s.seed;
  double duration = 2.0;
  double distance = 3.0, azimuth = 0.0, elevation = 0.0;
  bool polar = false;

  if (!args.scene_file.empty()) {
    std::ifstream in(args.scene_file);
    if (!in) throw InputError("scene: cannot open " + args.scene_file);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw InputError(args.scene_file + ": malformed JSON (" + e.what() + ")");
    }
    const auto& origin = args.scene_file;
    if (j.contains("source")) {
      std::vector<double> p;
      take(j, "source", p, origin);
      if (p.size() != 3) throw InputError(origin + ": \"source\" must be [x, y, z]");
      scene.source_position = Vec3(p[0], p[1], p[2]);
    }
    std::string kind = to_string(scene.kind);
    take(j, "kind", kind, origin);
    scene.kind = parse_signal_kind(kind);
    take(j, "tone_hz", scene.tone_hz, origin);
    if (j.contains("snr_db") && j["snr_db"].is_null()) {
      scene.snr_db = std::numeric_limits<double>::infinity();
    } else {
      take(j, "snr_db", scene.snr_db, origin);
    }
    take(j, "duration_s", duration, origin);
    take(j, "seed", scene.seed, origin);
    if (j.contains("echoes")) {
      if (!j["echoes"].is_array()) throw InputError(origin + ": \"echoes\" must be an array");
      for (const auto& e : j["echoes"]) {
        Echo echo;
        take(e, "delay_ms", echo.delay_ms, origin);
        take(e, "attenuation", echo.attenuation, origin);
        scene.echoes.push_back(echo);
      }
    }
  }

  if (args.source) {
    if (args.source->size() != 3) throw InputError("--source expects x,y,z");
    scene.source_position = Vec3((*args.source)[0], (*args.source)[1], (*args.source)[2]);
  }
  if (args.distance || args.azimuth || args.elevation) {
    if (args.source) throw InputError("--source cannot be combined with --distance/--azimuth/--elevation");
    polar = true;
    distance = args.distance.value_or(distance);
    azimuth = args.azimuth.value_or(azimuth);
    elevation = args.elevation.value_or(elevation);
  }
  if (polar) scene.source_position = geom.center() + distance * angles_to_direction(azimuth, elevation);
  if (args.kind) scene.kind = parse_signal_kind(*args.kind);
  if (args.tone_hz) scene.tone_hz = *args.tone_hz;
  if (args.snr_db) scene.snr_db = *args.snr_db;
  if (!args.echoes.empty()) {
    scene.echoes.clear();
    for (const auto& e : args.echoes) scene.echoes.push_back(parse_echo(e));
  }
  if (args.duration) duration = *args.duration;
  if (flags.seed) scene.seed = *flags.seed;

  MultichannelAudio audio{geom.sample_rate(), render(scene, geom, duration)};
  if (args.pcm16) {
    for (auto& ch : audio.channels)
      for (double v : ch)
        if (std::abs(v) > 1.0) throw InputError("--pcm16: rendered signal clips; lower the level or use float output");
    write_multichannel_wav_pcm16(args.output, audio);
  } else {
    write_multichannel_wav(args.output, audio);
  }
  const Angles a = direction_to_angles((scene.source_position - geom.center()).normalized());
  std::cerr << "wrote " << args.output << ": " << audio.channels.size() << " channels, "
            << audio.channels.front().size() << " samples, source azimuth=" << format_number(a.azimuth_deg, 4)
            << " elevation=" << format_number(a.elevation_deg, 4) << '\n';
  return 0;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string mode;
  std::string output;
  double snr_db = 15.0;
  double step_deg = 30.0;
  double duration = 1.0;
  std::string kind = "white";
  std::vector<std::string> echoes;
  std::size_t trials = 500;
  std::vector<double> distances{0.25, 0.3, 0.4, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0};
  bool unquantized = false;
};

int run_eval(const Flags& flags, const EvalArgs& args) {
  if (args.mode != "table1" && args.mode != "nearfield" && args.mode != "bench")
    throw InputError("unknown eval mode '" + args.mode + "' (expected table1, nearfield or bench)");
  const Settings s = resolve(flags);
  const ArrayGeometry geom = load_geometry(s);
  if (flags.show_config) {
    show_config(s, geom);
    return 0;
  }
  const auto cfg = locator_config(s, geom.sample_rate());
  Output out(args.output);

  if (args.mode == "table1") {
    Table1Options opts;
    opts.snr_db = args.snr_db;
    opts.azimuth_step_deg = args.step_deg;
    opts.duration_s = args.duration;
    opts.kind = parse_signal_kind(args.kind);
    for (const auto& e : args.echoes) opts.echoes.push_back(parse_echo(e));
    opts.seed = s.seed;
    if (!(opts.azimuth_step_deg > 0.0 && opts.azimuth_step_deg <= 360.0))
      throw InputError("--step must lie in (0, 360]");
    CsvWriter csv(out.stream(), {"source", "distance_m", "elevation_deg", "snr_db", "scenes", "eligible_frames",
                                 "detections", "detection_rate", "mean_error_deg", "reported_error_deg"});
    for (const auto& r : simulate_table1(geom, cfg, opts))
      csv.row({"simulated", format_number(r.spec.distance_m), format_number(r.spec.elevation_deg),
               format_number(opts.snr_db), std::to_string(r.scenes), std::to_string(r.eligible_frames),
               std::to_string(r.detections),
               format_number(r.eligible_frames ? static_cast<double>(r.detections) / static_cast<double>(r.eligible_frames)
                                               : 0.0),
               format_number(r.mean_error_deg), format_number(r.spec.reported_error_deg)});
  } else if (args.mode == "nearfield") {
    const auto errors = nearfield_error_curve(geom, args.distances, args.trials, !args.unquantized, s.seed);
    CsvWriter csv(out.stream(), {"source", "distance_m", "trials", "quantized", "mean_error_deg"});
    for (std::size_t k = 0; k < errors.size(); ++k)
      csv.row({"simulated", format_number(args.distances[k]), std::to_string(args.trials),
               args.unquantized ? "false" : "true", format_number(errors[k])});
  } else {
    const auto b = benchmark_pipeline(geom, cfg, args.duration);
    CsvWriter csv(out.stream(), {"source", "microphones", "frame_size", "sample_rate", "frames", "threads",
                                 "serial_fps", "parallel_fps", "realtime_fps", "serial_realtime_factor",
                                 "parallel_realtime_factor"});
    csv.row({"simulated", std::to_string(geom.mic_count()), std::to_string(cfg.frame.frame_size),
             format_number(cfg.frame.sample_rate), std::to_string(b.frames), std::to_string(omp_get_max_threads()),
             format_number(b.serial_fps), format_number(b.parallel_fps), format_number(b.realtime_fps),
             format_number(b.serial_realtime_factor()), format_number(b.parallel_realtime_factor())});
  }
  out.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sound source direction from microphone-array TDOAs"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  Flags flags;
  app.add_option("-g,--geometry", flags.geometry,
                 std::string("Array geometry JSON (default: $") + kGeometryEnv + ", else the built-in prism)");
  app.add_option("-c,--config", flags.config_path, "JSON file of defaults; flags override it");
  app.add_flag("--show-config", flags.show_config, "Print the effective configuration and exit");
  app.add_option("-N,--frame-size", flags.frame_size, "Frame length in samples (power of two)");
  app.add_option("--fs,--sample-rate", flags.sample_rate, "Sample rate in Hz");
  app.add_option("--speed-of-sound", flags.speed_of_sound, "Speed of sound in m/s");
  app.add_option("--alpha", flags.alpha, "Noise-masking over-subtraction factor");
  app.add_option("--gamma", flags.gamma, "Local-SNR enhancement exponent");
  app.add_option("--lambda", flags.lambda, "Noise estimate update rate");
  app.add_option("--warmup", flags.warmup_frames, "Noise warm-up frames");
  app.add_option("-M,--peaks", flags.peaks, "Peaks kept per microphone pair");
  app.add_option("--min-separation", flags.min_separation, "Minimum lag distance between kept peaks");
  app.add_option("--tol", flags.tolerance, "Consistency tolerance in samples");
  app.add_option("--gate", flags.gate, "Detection gate factor over the median correlation level");
  app.add_option("--seed", flags.seed, "Random seed for simulation");
  app.add_flag("--serial", flags.serial, "Run the serial reference kernels");

  LocateArgs locate_args;
  auto* locate_cmd = app.add_subcommand("locate", "Estimate source directions in a multichannel WAV file");
  locate_cmd->add_option("audio", locate_args.audio, "Multichannel WAV (one channel per microphone)")->required();
  locate_cmd->add_option("-o,--output", locate_args.output, "Write detections (JSON lines) here instead of stdout");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Render a synthetic scene to a multichannel WAV file");
  sim_cmd->add_option("-o,--output", sim.output, "Output WAV path")->required();
  sim_cmd->add_option("--scene", sim.scene_file, "Scene JSON (flags override its fields)");
  sim_cmd->add_option("--source", sim.source, "Source position x,y,z in meters")->delimiter(',')->expected(3);
  sim_cmd->add_option("--distance", sim.distance, "Source distance from the array center (m)");
  sim_cmd->add_option("--azimuth", sim.azimuth, "Source azimuth (deg)");
  sim_cmd->add_option("--elevation", sim.elevation, "Source elevation (deg)");
  sim_cmd->add_option("--kind", sim.kind, "white | speech | tone | impulse");
  sim_cmd->add_option("--tone-hz", sim.tone_hz, "Tone frequency");
  sim_cmd->add_option("--snr", sim.snr_db, "SNR in dB at the array center (omit for no noise)");
  sim_cmd->add_option("--echo", sim.echoes, "Echo DELAY_MS:ATTENUATION (repeatable)");
  sim_cmd->add_option("--duration", sim.duration, "Seconds to render (default 2)");
  sim_cmd->add_flag("--pcm16", sim.pcm16, "Write 16-bit PCM instead of 32-bit float");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Simulated evaluation sweeps (CSV)");
  eval_cmd->add_option("mode", ev.mode, "table1 | nearfield | bench")->required();
  eval_cmd->add_option("-o,--output", ev.output, "Write CSV here instead of stdout");
  eval_cmd->add_option("--snr", ev.snr_db, "table1: SNR in dB")->capture_default_str();
  eval_cmd->add_option("--step", ev.step_deg, "table1: azimuth step in degrees")->capture_default_str();
  eval_cmd->add_option("--duration", ev.duration, "table1/bench: seconds per scene")->capture_default_str();
  eval_cmd->add_option("--kind", ev.kind, "table1: source kind")->capture_default_str();
  eval_cmd->add_option("--echo", ev.echoes, "table1: echo DELAY_MS:ATTENUATION (repeatable)");
  eval_cmd->add_option("--trials", ev.trials, "nearfield: directions per distance")->capture_default_str();
  eval_cmd->add_option("--distances", ev.distances, "nearfield: distances in meters")->delimiter(',');
  eval_cmd->add_flag("--unquantized", ev.unquantized, "nearfield: keep fractional delays");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*locate_cmd) return run_locate(flags, locate_args);
    if (*sim_cmd) return run_simulate(flags, sim);
    if (*eval_cmd) return run_eval(flags, ev);
    if (flags.show_config) {
      const Settings s = resolve(flags);
      show_config(s, load_geometry(s, 48000.0));
      return 0;
    }
    std::cerr << "A subcommand is required\n" << app.help();
    return kExitInput;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const DegenerateDirection& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitProcessing;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitProcessing;
  }
}
