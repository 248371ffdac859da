#pragma once

// End-to-end pipelines behind the command line tool. Each stage consumes
// and produces datasets; the CLI only adds argument handling and exit codes.
//
// Exit codes: 0 success, 2 configuration or geometry error, 3 data/mode
// mismatch (including unusable or out-of-range data), 4 numerical failure.

#include "octsim/io.hpp"

#include <json.hpp>

#include <exception>
#include <filesystem>
#include <string>
#include <vector>

namespace octsim {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitMismatch = 3;
inline constexpr int kExitNumerical = 4;

int exit_code_for(const std::exception& e);

struct CsvExport {
  std::string file;
  std::string text;
};

struct PipelineResult {
  Dataset dataset;
  std::vector<CsvExport> csv;
};

/// Phantom dataset from the "phantom" section.
Dataset make_phantom_dataset(const nlohmann::json& config);

/// Synthetic data for a phantom dataset. The product depends on the phantom
/// kind unless simulate.product overrides it. Output is independent of
/// `threads`.
Dataset simulate_dataset(const Dataset& phantom, const nlohmann::json& config, unsigned threads = 1);

/// mode in {cone, axial, dispersive, layered, aniso}.
PipelineResult reconstruct_dataset(const Dataset& data, const std::string& mode, const nlohmann::json& config);

/// Writes the dataset directory, then the CSV exports into it.
void write_result(const std::filesystem::path& out, const PipelineResult& result);

}  // namespace octsim
