#pragma once

// Dataset persistence: one directory per dataset holding manifest.json and
// one raw little-endian row-major binary file per array.

#include "octsim/anisotropic.hpp"
#include "octsim/forward.hpp"
#include "octsim/radon.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace octsim {

inline constexpr const char* kDatasetFormat = "octsim-dataset";
inline constexpr int kDatasetVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

enum class DType { Float64, Complex128 };

struct Array {
  std::string name;
  DType dtype = DType::Float64;
  std::vector<std::size_t> shape;
  std::vector<double> data;  ///< complex values interleaved (re, im)

  std::size_t element_count() const;
};

struct Dataset {
  std::string kind;
  nlohmann::json attributes = nlohmann::json::object();
  nlohmann::json provenance = nlohmann::json::object();
  std::vector<Array> arrays;

  const Array& array(const std::string& name) const;
  bool has(const std::string& name) const;
  void add(Array a);
};

Array real_array(std::string name, std::vector<std::size_t> shape, std::vector<double> data);
Array complex_array(std::string name, std::vector<std::size_t> shape, const std::vector<cplx>& data);
std::vector<cplx> complex_values(const Array& a);

/// Writes into a temporary sibling directory and renames it into place.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& dir);

/// Atomic text file write (temporary file + rename).
void write_text_file(const std::filesystem::path& file, const std::string& text);

/// CSV with '.' decimal separator and 17 significant digits.
std::string format_double(double v);
std::string csv_table(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows);

// Conversions. Each *_to_dataset / dataset_to_* pair round-trips bit-exactly.

nlohmann::json units_to_json(const Units& u);
Units units_from_json(const nlohmann::json& j);
nlohmann::json geometry_to_json(const Geometry& g);
Geometry geometry_from_json(const nlohmann::json& j);
void add_pulse(Dataset& ds, const Pulse& pulse);
Pulse read_pulse(const Dataset& ds);

Dataset phantom_to_dataset(const Phantom& phantom, const Units& units);
Phantom dataset_to_phantom(const Dataset& ds, Units* units = nullptr);

Dataset measurements_to_dataset(const MeasurementSet& m);
MeasurementSet dataset_to_measurements(const Dataset& ds);

Dataset traces_to_dataset(const TraceSet& t);
TraceSet dataset_to_traces(const Dataset& ds);

Dataset radon_bins_to_dataset(const RadonBins& rb);
RadonBins dataset_to_radon_bins(const Dataset& ds);

/// Rotated-sample data a[theta][rotation][sigma][slice][p][j] with the
/// rotations, directions and plane offsets used.
struct RotatedDataSet {
  Units units;
  std::vector<Vec3> thetas;
  std::vector<Mat3> rotations;
  std::vector<double> sigmas;
  std::size_t slices = 1;
  std::vector<double> values;

  double& at(std::size_t th, std::size_t r, std::size_t s, std::size_t sl, std::size_t p, std::size_t j) {
    return values[(((((th * rotations.size() + r) * sigmas.size() + s) * slices + sl) * 3 + p) * 2) + j];
  }
  double at(std::size_t th, std::size_t r, std::size_t s, std::size_t sl, std::size_t p, std::size_t j) const {
    return values[(((((th * rotations.size() + r) * sigmas.size() + s) * slices + sl) * 3 + p) * 2) + j];
  }
};

Dataset rotated_to_dataset(const RotatedDataSet& r);
RotatedDataSet dataset_to_rotated(const Dataset& ds);

}  // namespace octsim
