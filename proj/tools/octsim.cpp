#include "octsim/config.hpp"
#include "octsim/pipeline.hpp"
#include "octsim/validate.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

namespace {

void apply_seed(nlohmann::json& config, const std::optional<std::uint64_t>& seed) {
  if (seed) config["seed"] = *seed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"octsim: simulation and reconstruction for time-domain optical coherence tomography"};
  app.require_subcommand(1);

  std::string config_file;
  std::string out_dir;
  std::string input_dir;
  std::string mode;
  unsigned threads = 1;
  std::optional<std::uint64_t> seed;

  auto* phantom = app.add_subcommand("phantom", "build a phantom dataset from a configuration");
  phantom->add_option("--config", config_file, "JSON configuration")->required()->envname("OCTSIM_CONFIG");
  phantom->add_option("--out", out_dir, "output dataset directory")->required();
  phantom->add_option("--seed", seed, "seed for random phantom content")->envname("OCTSIM_SEED");

  auto* simulate = app.add_subcommand("simulate", "synthesize data for a phantom dataset");
  simulate->add_option("--config", config_file, "JSON configuration")->required()->envname("OCTSIM_CONFIG");
  simulate->add_option("--input", input_dir, "phantom dataset directory")->required();
  simulate->add_option("--out", out_dir, "output dataset directory")->required();
  simulate->add_option("--threads", threads, "worker threads (output does not depend on it)")
      ->envname("OCTSIM_THREADS")
      ->check(CLI::Range(1u, 1024u));
  simulate->add_option("--seed", seed, "seed recorded in provenance")->envname("OCTSIM_SEED");

  auto* reconstruct = app.add_subcommand("reconstruct", "invert a measurement or trace dataset");
  reconstruct->add_option("--config", config_file, "JSON configuration")->required()->envname("OCTSIM_CONFIG");
  reconstruct->add_option("--input", input_dir, "input dataset directory")->required();
  reconstruct->add_option("--out", out_dir, "output dataset directory")->required();
  reconstruct->add_option("--mode", mode, "cone, axial, dispersive, layered or aniso")
      ->required()
      ->check(CLI::IsMember({"cone", "axial", "dispersive", "layered", "aniso"}));

  auto* validate = app.add_subcommand("validate", "run the built-in self-checks");
  validate->add_option("--seed", seed, "seed for randomized checks")->envname("OCTSIM_SEED");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return octsim::kExitConfig;
  }

  try {
    if (*phantom) {
      nlohmann::json config = octsim::load_config(config_file);
      apply_seed(config, seed);
      octsim::write_dataset(out_dir, octsim::make_phantom_dataset(config));
    } else if (*simulate) {
      nlohmann::json config = octsim::load_config(config_file);
      apply_seed(config, seed);
      const octsim::Dataset in = octsim::read_dataset(input_dir);
      octsim::write_dataset(out_dir, octsim::simulate_dataset(in, config, threads));
    } else if (*reconstruct) {
      const nlohmann::json config = octsim::load_config(config_file);
      const octsim::Dataset in = octsim::read_dataset(input_dir);
      octsim::write_result(out_dir, octsim::reconstruct_dataset(in, mode, config));
    } else if (*validate) {
      const auto results = octsim::run_validation({}, seed.value_or(1));
      bool ok = true;
      for (const auto& r : results) {
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << " measured=" << r.measured << " (" << r.detail
                  << ")\n";
        ok = ok && r.pass;
      }
      return ok ? octsim::kExitOk : octsim::kExitNumerical;
    }
  } catch (const octsim::DetectionFailure& e) {
    std::cerr << "error: " << e.what() << "\n" << e.diagnostic() << "\n";
    return octsim::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return octsim::exit_code_for(e);
  }
  return octsim::kExitOk;
}
