#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bisim/archive.hpp"
#include "bisim/config.hpp"

namespace bisim {

/// Subcommands understood by run(), in CLI order.
const std::vector<std::string>& subcommand_names();

struct RunResult {
  ResultArchive archive;
  nlohmann::json summary;
  /// Set when a solver flagged non-convergence (CLI exit code 3).
  std::optional<std::string> numerical_failure;
};

struct RunInputs {
  /// Archive from an earlier `simulate` run; its cubes replace synthesis.
  std::optional<ResultArchive> cubes;
};

/// Executes one subcommand. Module errors are rethrown with the subcommand
/// name prepended; the error class is preserved.
RunResult run(const std::string& subcommand, const RunConfig& config, const RunInputs& inputs = {});

/// All paths of one link at absolute time t: LoS, static clutter, targets.
/// H–H polarization is selected for paths carrying a Jones matrix.
std::vector<PathParameterSet> scene_paths(const SceneConfig& scene, const LinkSpec& link, double t,
                                          double wavelength, bool include_targets = true);

/// Noise-free or noisy cube of one link (noise stream = link index).
SlowTimeCube synthesize_link(const RunConfig& config, std::size_t link_index, bool include_targets = true);

/// Writes `<subcommand>.bisim` (or one CSV per ≤ 2-D dataset) and
/// `<subcommand>.summary.json` into `directory`. Returns the written paths.
std::vector<std::filesystem::path> write_result(const RunResult& result, const std::string& subcommand,
                                                const std::filesystem::path& directory,
                                                const std::string& format);

}  // namespace bisim
