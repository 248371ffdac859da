#pragma once

// Run configuration: JSON documents parsed into domain objects. Every
// violation raises ConfigurationError (or GeometryError for geometry
// constraints) whose message starts with the offending field path.

#include "octsim/anisotropic.hpp"
#include "octsim/inversion.hpp"
#include "octsim/layered.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace octsim {

nlohmann::json load_config(const std::filesystem::path& file);

/// SHA-256 (hex) of the canonical serialization of the configuration.
std::string config_hash(const nlohmann::json& config);

Units parse_units(const nlohmann::json& config);
std::uint64_t parse_seed(const nlohmann::json& config);

/// The "phantom" section. Random blob fields draw from `seed`.
Phantom parse_phantom(const nlohmann::json& config);

/// The "geometry" section.
Geometry parse_geometry(const nlohmann::json& config);

/// The "pulse" section (needs the geometry for the support window).
Pulse parse_pulse(const nlohmann::json& config, const Geometry& geometry);

struct SimulateOptions {
  std::string product;  ///< "measurements", "traces" or "rotated"; empty picks by phantom kind
  TimeGrid trace_grid;
  TraceModel trace_model = TraceModel::Continuous;
  bool layered_attenuation = true;
  std::vector<Mat3> rotations;
  std::vector<double> sigmas;
};

SimulateOptions parse_simulate(const nlohmann::json& config);

struct ReconstructOptions {
  double eps_f = 1e-3;
  std::optional<VoxelGrid> cone_grid;
  AxialOptions axial;
  std::optional<long> n_max;
  long n_min = 0;
  std::optional<double> T;
  std::size_t bins_per_T = 8;
  LayeredOptions layered;
};

ReconstructOptions parse_reconstruct(const nlohmann::json& config);

/// Rotation by `angle` (radians) about `axis` (normalized internally).
Mat3 axis_angle_rotation(const Vec3& axis, double angle);

}  // namespace octsim
