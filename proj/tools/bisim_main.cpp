// bisim: scene simulation and radar processing from a YAML run configuration.

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "bisim/archive.hpp"
#include "bisim/config.hpp"
#include "bisim/errors.hpp"
#include "bisim/parallel.hpp"
#include "bisim/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct Overrides {
  std::string config;
  std::string out;
  std::string format;
  std::string input;
  std::optional<std::uint64_t> seed;
  std::optional<double> gate_ns;
  std::optional<std::size_t> fft;
  std::optional<std::size_t> hop;
};

std::string describe(const std::string& name) {
  if (name == "simulate") return "Synthesize slow-time cubes for every link";
  if (name == "ddmap") return "Delay-Doppler maps and peak detections";
  if (name == "spectrogram") return "Micro-Doppler STFT of one delay bin";
  if (name == "clean") return "Subtract dominant static paths";
  if (name == "localize") return "Fuse bistatic observations into position and velocity";
  if (name == "reflectivity") return "Polarimetric reflectivity over a 4-D angle grid";
  if (name == "flyover") return "Bistatic-angle sweep of target delay profiles";
  if (name == "focus") return "Time-reversal focusing and Doppler pre-compensation";
  if (name == "linkbudget") return "Bistatic radar equation and channel cross-check";
  return {};
}

bisim::RunConfig effective_config(const Overrides& o) {
  bisim::RunConfig c = bisim::load_config(o.config, o.seed);
  if (!o.out.empty()) c.output.directory = o.out;
  if (!o.format.empty()) c.output.format = o.format;
  if (o.gate_ns) {
    c.processing.gate_width_ns = *o.gate_ns;
    c.flyover.gate_width_ns = *o.gate_ns;
  }
  if (o.fft) c.processing.stft.fft_size = *o.fft;
  if (o.hop) c.processing.stft.hop = *o.hop;
  c.validate();
  return c;
}

int run_subcommand(const std::string& name, const Overrides& o) {
  const bisim::RunConfig config = effective_config(o);
  bisim::RunInputs inputs;
  if (!o.input.empty()) {
    spdlog::info("reading cubes from {}", o.input);
    inputs.cubes = bisim::ResultArchive::read(o.input);
  }
  spdlog::info("{}: {} link(s), {} target(s), {} worker(s)", name, config.scene.links.size(),
               config.scene.targets.size(), bisim::worker_count());
  const auto result = bisim::run(name, config, inputs);
  for (const auto& path : bisim::write_result(result, name, config.output.directory, config.output.format)) {
    spdlog::info("wrote {}", path.string());
  }
  if (result.numerical_failure) {
    spdlog::error("{}", *result.numerical_failure);
    return kExitNumerical;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("bisim");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Bistatic ISAC radar scene simulation and processing"};
  app.set_version_flag("--version", std::string(bisim::library_version()));
  app.require_subcommand(1);
  app.fallthrough();

  std::size_t threads = 0;
  bool verbose = false;
  bool quiet = false;
  app.add_option("--threads", threads, "Worker threads (0 = hardware concurrency)")->check(CLI::NonNegativeNumber);
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Errors only");

  Overrides o;
  std::string chosen;
  for (const auto& name : bisim::subcommand_names()) {
    auto* sub = app.add_subcommand(name, describe(name));
    sub->add_option("--config", o.config, "YAML run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory (overrides output.directory)");
    sub->add_option("--seed", o.seed, "Noise seed (overrides noise.seed)");
    sub->add_option("--format", o.format, "Archive format")->check(CLI::IsMember({"bin", "csv"}));
    sub->add_option("--input", o.input, "Cubes from an earlier simulate archive")->check(CLI::ExistingFile);
    sub->add_option("--gate-ns", o.gate_ns, "Time-gate width in ns");
    sub->add_option("--fft", o.fft, "STFT length in symbols");
    sub->add_option("--hop", o.hop, "STFT hop in symbols");
    sub->callback([&chosen, name] { chosen = name; });
  }

  std::string export_archive;
  std::string export_dataset;
  std::string export_path;
  auto* exp = app.add_subcommand("export", "Write one ≤ 2-D dataset of an archive as CSV");
  exp->add_option("--input", export_archive, "Archive")->required()->check(CLI::ExistingFile);
  exp->add_option("--dataset", export_dataset, "Dataset name")->required();
  exp->add_option("--csv", export_path, "Output CSV path")->required();
  exp->callback([&chosen] { chosen = "export"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  spdlog::set_level(quiet ? spdlog::level::err : verbose ? spdlog::level::debug : spdlog::level::info);
  bisim::set_worker_count(threads ? threads : std::max(1u, std::thread::hardware_concurrency()));

  try {
    if (chosen == "export") {
      bisim::export_csv(bisim::ResultArchive::read(export_archive), export_dataset, export_path);
      spdlog::info("wrote {}", export_path);
      return kExitOk;
    }
    return run_subcommand(chosen, o);
  } catch (const bisim::ConfigError& e) {
    spdlog::error("configuration: {}", e.what());
    return kExitConfig;
  } catch (const bisim::UsageError& e) {
    spdlog::error("usage: {}", e.what());
    return kExitConfig;
  } catch (const bisim::IoError& e) {
    spdlog::error("i/o: {}", e.what());
    return kExitIo;
  } catch (const bisim::Error& e) {
    spdlog::error("numerical: {}", e.what());
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("i/o: {}", e.what());
    return kExitIo;
  }
}
