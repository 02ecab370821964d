#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bisim/channel.hpp"
#include "bisim/echo.hpp"
#include "bisim/fusion.hpp"
#include "bisim/geometry.hpp"
#include "bisim/illumination.hpp"
#include "bisim/scattering.hpp"

namespace bisim {

struct TargetSpec {
  std::string id;
  Target model;
};

struct LinkSpec {
  std::string tx_id;
  std::string rx_id;
  std::string name() const { return tx_id + "-" + rx_id; }
};

struct SceneConfig {
  std::vector<NodeMotion> transmitters;
  std::vector<NodeMotion> receivers;
  std::vector<LinkSpec> links;  // all Tx × Rx pairs unless listed explicitly
  std::vector<TargetSpec> targets;
  std::vector<ClutterPoint> clutter;  // static one-bounce scatterers
  bool include_los = true;
  double start_time = 0.0;  // timestamp of symbol 0, s

  const NodeMotion& node(const std::string& id) const;
  const TargetSpec& target(const std::string& id) const;
};

struct NoiseConfig {
  double snr_db = kNoiselessSnr;
  std::optional<std::uint64_t> seed;
  bool enabled() const { return snr_db != kNoiselessSnr; }
};

struct ProcessingConfig {
  SynthMode mode = SynthMode::kGeometric;
  MapWindows windows;
  bool background_subtract = false;
  std::size_t clean_paths = 0;
  CleanOptions clean;
  double threshold_db = 20.0;
  bool exclude_zero_doppler = true;
  std::size_t max_detections = 16;
  double gate_center_ns = 0.0;
  double gate_width_ns = 2.0;
  StftOptions stft;
  std::string spectrogram_link;                      // empty: first link
  std::optional<std::size_t> spectrogram_delay_bin;  // empty: bin of the first target
};

struct ReflectivityConfig {
  std::string target;  // empty: first target
  AngleGrid grid{{0.0}, {0.0}, {180.0}, {0.0}};
  double d_tx = 3.0;
  double d_rx = 3.0;
  FrequencyBand band;
  Window window = Window::kHann;
  double time = 0.0;
  std::size_t oversample = 1;
};

struct FlyoverConfig {
  std::string target;
  double fixed_angle = 0.0;  // deg
  AngleSweep sweep;
  double d_tx = 3.0;
  double d_rx = 3.0;
  FrequencyBand band;
  Window window = Window::kHann;
  double time = 0.0;
  std::size_t oversample = 8;  // delay-axis zero padding
  double gate_center_ns = 0.0;
  double gate_width_ns = 2.0;
  double spread_threshold_db = -10.0;
};

enum class ObservationSource { kMeasured, kTruth, kListed };

struct LocalizeConfig {
  ObservationSource source = ObservationSource::kMeasured;
  std::string target;  // truth source: target whose reference point is observed
  std::vector<BistaticObservation> observations;
  LocalizeOptions options;
};

struct FocusConfig {
  std::string target;
  std::vector<std::string> transmitters;  // empty: all
};

struct OutputConfig {
  std::filesystem::path directory = "out";
  std::string format = "bin";  // bin | csv
};

struct RunConfig {
  SceneConfig scene;
  WaveformConfig waveform;
  ProcessingConfig processing;
  NoiseConfig noise;
  ReflectivityConfig reflectivity;
  FlyoverConfig flyover;
  LocalizeConfig localize;
  FocusConfig focus;
  LinkBudget link_budget;
  OutputConfig output;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Parses and validates a YAML run configuration. A seed override replaces
/// noise.seed before validation. Parse errors carry line and column.
RunConfig load_config(const std::filesystem::path& path,
                      std::optional<std::uint64_t> seed_override = std::nullopt);
RunConfig parse_config(const std::string& yaml_text,
                       std::optional<std::uint64_t> seed_override = std::nullopt);

/// Every effective parameter, defaults included.
nlohmann::json config_to_json(const RunConfig& config);

}  // namespace bisim
