#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>

#include "photonsync/scenario.hpp"

namespace photonsync::cli {

enum ExitCode : int {
  kOk = 0,
  kNotLocked = 1,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kAcquisition = 5,
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A scenario file path, or the name of a built-in preset.
ScenarioConfig resolve_scenario(const std::string& arg, std::optional<std::uint64_t> seed = {});

/// `flag` if given, else $PHOTONSYNC_OUT_DIR, else the working directory.
std::filesystem::path output_dir(const std::string& flag);

std::ofstream open_output(const std::filesystem::path& path);

struct ReproOptions {
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
  bool quick = false;
};

/// Writes `<figure>.csv` and `plot_<figure>.py` into out_dir.
void run_repro(const std::string& figure, const ReproOptions& options);
const std::vector<std::string>& repro_figures();

}  // namespace photonsync::cli
