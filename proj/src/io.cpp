#include "octsim/io.hpp"

#include <unistd.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace octsim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigurationError("expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json grid_json(const VoxelGrid& g) {
  return {{"origin", vec_json(g.origin)},
          {"spacing", vec_json(g.spacing)},
          {"dims", json::array({g.dims[0], g.dims[1], g.dims[2]})}};
}

VoxelGrid grid_from(const json& j) {
  VoxelGrid g;
  g.origin = vec_from(j.at("origin"));
  g.spacing = vec_from(j.at("spacing"));
  const auto& d = j.at("dims");
  for (std::size_t i = 0; i < 3; ++i) g.dims[i] = d.at(i).get<std::size_t>();
  return g;
}

json bins_json(const TimeBins& b) { return {{"T", b.T}, {"count", b.count}}; }
TimeBins bins_from(const json& j) { return {j.at("T").get<double>(), j.at("count").get<std::size_t>()}; }

json thetas_json(const std::vector<Vec3>& th) {
  json a = json::array();
  for (const auto& t : th) a.push_back(vec_json(t));
  return a;
}

std::vector<Vec3> thetas_from(const json& j) {
  std::vector<Vec3> out;
  for (const auto& t : j) out.push_back(vec_from(t));
  return out;
}

void check_name(const std::string& name) {
  if (name.empty() || !std::all_of(name.begin(), name.end(), [](char ch) {
        return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-';
      }))
    throw ConfigurationError("invalid array name '" + name + "'");
}

double swap_bytes(double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, sizeof u);
  u = __builtin_bswap64(u);
  std::memcpy(&v, &u, sizeof u);
  return v;
}

json encode_field(Dataset& ds, const SpatialField& field, const std::string& name) {
  if (const auto* vox = std::get_if<ScalarVoxels>(&field)) {
    const auto& d = vox->grid.dims;
    ds.add(real_array(name, {d[0], d[1], d[2]}, vox->values));
    return {{"type", "voxels"}, {"grid", grid_json(vox->grid)}};
  }
  if (const auto* blobs = std::get_if<BlobSet>(&field)) {
    std::vector<double> data;
    for (const auto& b : blobs->blobs)
      data.insert(data.end(), {b.center.x(), b.center.y(), b.center.z(), b.width, b.amplitude});
    ds.add(real_array(name, {blobs->blobs.size(), 5}, std::move(data)));
    return {{"type", "blobs"}, {"columns", {"cx", "cy", "cz", "width", "amplitude"}}};
  }
  const auto& prof = std::get<AxialProfile>(field);
  std::vector<double> data;
  for (const auto& b : prof.boxes) data.insert(data.end(), {b.z_lo, b.z_hi, b.amplitude});
  ds.add(real_array(name, {prof.boxes.size(), 3}, std::move(data)));
  return {{"type", "axial"}, {"columns", {"z_lo", "z_hi", "amplitude"}}};
}

SpatialField decode_field(const Dataset& ds, const json& desc, const std::string& name) {
  const auto type = desc.at("type").get<std::string>();
  const Array& a = ds.array(name);
  if (type == "voxels") {
    ScalarVoxels v{grid_from(desc.at("grid")), a.data};
    if (v.values.size() != v.grid.size()) throw ConfigurationError("voxel array size mismatch in " + name);
    return v;
  }
  if (type == "blobs") {
    if (a.shape.size() != 2 || a.shape[1] != 5) throw ConfigurationError("blob array must be n x 5");
    BlobSet set;
    for (std::size_t i = 0; i < a.shape[0]; ++i) {
      const double* r = &a.data[i * 5];
      set.blobs.push_back({Vec3(r[0], r[1], r[2]), r[3], r[4]});
    }
    return set;
  }
  if (type == "axial") {
    if (a.shape.size() != 2 || a.shape[1] != 3) throw ConfigurationError("axial box array must be n x 3");
    AxialProfile prof;
    for (std::size_t i = 0; i < a.shape[0]; ++i) {
      const double* r = &a.data[i * 3];
      prof.boxes.push_back({r[0], r[1], r[2]});
    }
    return prof;
  }
  throw ConfigurationError("unknown field type '" + type + "'");
}

void expect_kind(const Dataset& ds, const std::string& kind) {
  if (ds.kind != kind) throw ModeMismatchError("expected a '" + kind + "' dataset, got '" + ds.kind + "'");
}

}  // namespace

std::size_t Array::element_count() const {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

const Array& Dataset::array(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return a;
  throw ModeMismatchError("dataset has no array '" + name + "'");
}

bool Dataset::has(const std::string& name) const {
  return std::any_of(arrays.begin(), arrays.end(), [&](const Array& a) { return a.name == name; });
}

void Dataset::add(Array a) {
  check_name(a.name);
  if (has(a.name)) throw ConfigurationError("duplicate array name '" + a.name + "'");
  const std::size_t want = a.element_count() * (a.dtype == DType::Complex128 ? 2 : 1);
  if (a.data.size() != want) throw ConfigurationError("array '" + a.name + "' size does not match its shape");
  arrays.push_back(std::move(a));
}

Array real_array(std::string name, std::vector<std::size_t> shape, std::vector<double> data) {
  return {std::move(name), DType::Float64, std::move(shape), std::move(data)};
}

Array complex_array(std::string name, std::vector<std::size_t> shape, const std::vector<cplx>& data) {
  std::vector<double> flat;
  flat.reserve(2 * data.size());
  for (const auto& z : data) {
    flat.push_back(z.real());
    flat.push_back(z.imag());
  }
  return {std::move(name), DType::Complex128, std::move(shape), std::move(flat)};
}

std::vector<cplx> complex_values(const Array& a) {
  if (a.dtype != DType::Complex128) throw ConfigurationError("array '" + a.name + "' is not complex");
  std::vector<cplx> out(a.data.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {a.data[2 * i], a.data[2 * i + 1]};
  return out;
}

void write_text_file(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  fs::path tmp = file;
  tmp += ".tmp-" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, file);
}

void write_dataset(const fs::path& dir, const Dataset& ds) {
  if (dir.has_parent_path()) fs::create_directories(dir.parent_path());
  fs::path tmp = dir;
  tmp += ".tmp-" + std::to_string(::getpid());
  fs::remove_all(tmp);
  fs::create_directory(tmp);

  json manifest;
  manifest["format"] = kDatasetFormat;
  manifest["version"] = kDatasetVersion;
  manifest["kind"] = ds.kind;
  manifest["arrays"] = json::array();
  for (const auto& a : ds.arrays) {
    check_name(a.name);
    const std::string file = a.name + ".bin";
    std::ofstream out(tmp / file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + (tmp / file).string());
    if constexpr (std::endian::native == std::endian::little) {
      out.write(reinterpret_cast<const char*>(a.data.data()), static_cast<std::streamsize>(a.data.size() * 8));
    } else {
      for (double v : a.data) {
        const double s = swap_bytes(v);
        out.write(reinterpret_cast<const char*>(&s), 8);
      }
    }
    if (!out) throw Error("write failed for " + (tmp / file).string());
    manifest["arrays"].push_back({{"name", a.name},
                                  {"dtype", a.dtype == DType::Float64 ? "float64" : "complex128"},
                                  {"shape", a.shape},
                                  {"byte_order", "little"},
                                  {"layout", "row-major"},
                                  {"file", file}});
  }
  manifest["provenance"] = ds.provenance;
  manifest["attributes"] = ds.attributes;
  {
    std::ofstream out(tmp / "manifest.json", std::ios::trunc);
    out << manifest.dump(2) << '\n';
    if (!out) throw Error("write failed for manifest");
  }

  if (fs::exists(dir)) {
    fs::path old = dir;
    old += ".old-" + std::to_string(::getpid());
    fs::remove_all(old);
    fs::rename(dir, old);
    fs::rename(tmp, dir);
    fs::remove_all(old);
  } else {
    fs::rename(tmp, dir);
  }
}

Dataset read_dataset(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ConfigurationError("no manifest.json in " + dir.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw ConfigurationError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != kDatasetFormat) throw ConfigurationError("not an octsim dataset");
  if (manifest.value("version", 0) != kDatasetVersion) throw ConfigurationError("unsupported dataset version");
  Dataset ds;
  ds.kind = manifest.at("kind").get<std::string>();
  ds.provenance = manifest.value("provenance", json::object());
  ds.attributes = manifest.value("attributes", json::object());
  for (const auto& e : manifest.at("arrays")) {
    Array a;
    a.name = e.at("name").get<std::string>();
    const auto dtype = e.at("dtype").get<std::string>();
    if (dtype == "float64")
      a.dtype = DType::Float64;
    else if (dtype == "complex128")
      a.dtype = DType::Complex128;
    else
      throw ConfigurationError("unsupported dtype '" + dtype + "'");
    if (e.at("byte_order") != "little" || e.at("layout") != "row-major")
      throw ConfigurationError("array '" + a.name + "' must be little-endian row-major");
    a.shape = e.at("shape").get<std::vector<std::size_t>>();
    const std::size_t n = a.element_count() * (a.dtype == DType::Complex128 ? 2 : 1);
    const fs::path file = dir / e.at("file").get<std::string>();
    if (fs::file_size(file) != n * 8) throw ConfigurationError("array file size mismatch for '" + a.name + "'");
    a.data.resize(n);
    std::ifstream bin(file, std::ios::binary);
    bin.read(reinterpret_cast<char*>(a.data.data()), static_cast<std::streamsize>(n * 8));
    if (!bin) throw ConfigurationError("cannot read " + file.string());
    if constexpr (std::endian::native != std::endian::little)
      for (auto& v : a.data) v = swap_bytes(v);
    ds.add(std::move(a));
  }
  return ds;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific, 16);
  return std::string(buf, res.ptr);
}

std::string csv_table(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_double(row[i]);
    }
    out += '\n';
  }
  return out;
}

json units_to_json(const Units& u) { return {{"c", u.c}}; }
Units units_from_json(const json& j) { return Units{j.value("c", 1.0)}; }

json geometry_to_json(const Geometry& g) {
  return {{"d", g.d},
          {"R", g.R},
          {"delta", g.delta},
          {"mirrors", {{"r0", g.mirrors.r0}, {"dr", g.mirrors.dr}, {"count", g.mirrors.count}}},
          {"directions", thetas_json(g.directions)},
          {"polarization", vec_json(g.polarization)},
          {"units", units_to_json(g.units)}};
}

Geometry geometry_from_json(const json& j) {
  Geometry g;
  g.d = j.at("d").get<double>();
  g.R = j.at("R").get<double>();
  g.delta = j.at("delta").get<double>();
  const auto& m = j.at("mirrors");
  g.mirrors = {m.at("r0").get<double>(), m.at("dr").get<double>(), m.at("count").get<std::size_t>()};
  g.directions = thetas_from(j.at("directions"));
  g.polarization = vec_from(j.at("polarization"));
  g.units = units_from_json(j.at("units"));
  return g;
}

void add_pulse(Dataset& ds, const Pulse& pulse) {
  ds.attributes["pulse"] = {{"t0", pulse.t0()},
                            {"dt", pulse.dt()},
                            {"support_lo", pulse.support_lo()},
                            {"support_hi", pulse.support_hi()},
                            {"center_frequency", pulse.center_frequency()}};
  ds.add(real_array("pulse", {pulse.samples().size()}, pulse.samples()));
}

Pulse read_pulse(const Dataset& ds) {
  if (!ds.attributes.contains("pulse")) throw ModeMismatchError("dataset carries no pulse");
  const auto& p = ds.attributes.at("pulse");
  return Pulse(p.at("t0").get<double>(), p.at("dt").get<double>(), ds.array("pulse").data,
               p.at("support_lo").get<double>(), p.at("support_hi").get<double>(),
               p.at("center_frequency").get<double>());
}

Dataset phantom_to_dataset(const Phantom& phantom, const Units& units) {
  Dataset ds;
  ds.kind = "phantom";
  ds.attributes["units"] = units_to_json(units);
  if (const auto* nd = std::get_if<NonDispersiveScalar>(&phantom)) {
    ds.attributes["phantom_kind"] = "nondispersive";
    ds.attributes["field"] = encode_field(ds, nd->field, "chi");
  } else if (const auto* dsp = std::get_if<DispersiveScalar>(&phantom)) {
    ds.attributes["phantom_kind"] = "dispersive";
    ds.attributes["bins"] = bins_json(dsp->bins);
    json slices = json::array();
    for (std::size_t m = 0; m < dsp->slices.size(); ++m)
      slices.push_back(encode_field(ds, dsp->slices[m], "chi_" + std::to_string(m)));
    ds.attributes["slices"] = slices;
  } else if (const auto* lay = std::get_if<Layered>(&phantom)) {
    ds.attributes["phantom_kind"] = "layered";
    ds.attributes["bins"] = bins_json(lay->bins);
    ds.attributes["boundaries"] = lay->boundaries;
    std::vector<double> data;
    for (const auto& row : lay->profiles) data.insert(data.end(), row.begin(), row.end());
    ds.add(real_array("chi", {lay->profiles.size(), lay->bins.count}, std::move(data)));
  } else {
    const auto& an = std::get<AnisotropicMatrix>(phantom);
    ds.attributes["phantom_kind"] = "anisotropic";
    ds.attributes["grid"] = grid_json(an.grid);
    if (an.bins) ds.attributes["bins"] = bins_json(*an.bins);
    std::vector<double> data;
    for (const auto& slice : an.slices)
      for (const auto& m : slice)
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) data.push_back(m(i, j));
    const auto& d = an.grid.dims;
    ds.add(real_array("chi", {an.slices.size(), d[0], d[1], d[2], 3, 3}, std::move(data)));
  }
  return ds;
}

Phantom dataset_to_phantom(const Dataset& ds, Units* units) {
  expect_kind(ds, "phantom");
  if (units) *units = units_from_json(ds.attributes.at("units"));
  const auto kind = ds.attributes.at("phantom_kind").get<std::string>();
  if (kind == "nondispersive") return NonDispersiveScalar{decode_field(ds, ds.attributes.at("field"), "chi")};
  if (kind == "dispersive") {
    DispersiveScalar out{bins_from(ds.attributes.at("bins")), {}};
    const auto& slices = ds.attributes.at("slices");
    for (std::size_t m = 0; m < slices.size(); ++m)
      out.slices.push_back(decode_field(ds, slices[m], "chi_" + std::to_string(m)));
    return out;
  }
  if (kind == "layered") {
    Layered out;
    out.bins = bins_from(ds.attributes.at("bins"));
    out.boundaries = ds.attributes.at("boundaries").get<std::vector<double>>();
    const Array& a = ds.array("chi");
    if (a.shape.size() != 2 || a.shape[1] != out.bins.count) throw ConfigurationError("layer profile shape mismatch");
    for (std::size_t n = 0; n < a.shape[0]; ++n)
      out.profiles.emplace_back(a.data.begin() + static_cast<long>(n * a.shape[1]),
                                a.data.begin() + static_cast<long>((n + 1) * a.shape[1]));
    return out;
  }
  if (kind == "anisotropic") {
    AnisotropicMatrix out;
    out.grid = grid_from(ds.attributes.at("grid"));
    if (ds.attributes.contains("bins")) out.bins = bins_from(ds.attributes.at("bins"));
    const Array& a = ds.array("chi");
    const std::size_t per = out.grid.size();
    if (a.shape.empty() || a.element_count() != a.shape[0] * per * 9)
      throw ConfigurationError("anisotropic array shape mismatch");
    std::size_t idx = 0;
    for (std::size_t s = 0; s < a.shape[0]; ++s) {
      std::vector<Mat3> slice(per);
      for (auto& m : slice)
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) m(i, j) = a.data[idx++];
      out.slices.push_back(std::move(slice));
    }
    return out;
  }
  throw ConfigurationError("unknown phantom kind '" + kind + "'");
}

Dataset measurements_to_dataset(const MeasurementSet& m) {
  Dataset ds;
  ds.kind = "measurements";
  ds.attributes["geometry"] = geometry_to_json(m.geometry);
  ds.attributes["raw_imag_max"] = m.raw_imag_max;
  add_pulse(ds, m.pulse);
  ds.add(real_array("M", {m.n_mirror(), m.n_det(), 2}, m.values));
  return ds;
}

MeasurementSet dataset_to_measurements(const Dataset& ds) {
  expect_kind(ds, "measurements");
  MeasurementSet m;
  m.geometry = geometry_from_json(ds.attributes.at("geometry"));
  m.pulse = read_pulse(ds);
  m.raw_imag_max = ds.attributes.value("raw_imag_max", 0.0);
  m.values = ds.array("M").data;
  if (m.values.size() != m.n_mirror() * m.n_det() * 2) throw ConfigurationError("measurement array shape mismatch");
  return m;
}

Dataset traces_to_dataset(const TraceSet& t) {
  Dataset ds;
  ds.kind = "traces";
  ds.attributes["units"] = units_to_json(t.units);
  ds.attributes["grid"] = {{"t0", t.grid.t0}, {"dt", t.grid.dt}, {"count", t.grid.count}};
  ds.attributes["thetas"] = thetas_json(t.thetas);
  std::vector<double> data;
  for (const auto& row : t.values) data.insert(data.end(), row.begin(), row.end());
  ds.add(real_array("m", {t.thetas.size(), t.grid.count}, std::move(data)));
  return ds;
}

TraceSet dataset_to_traces(const Dataset& ds) {
  expect_kind(ds, "traces");
  TraceSet t;
  t.units = units_from_json(ds.attributes.at("units"));
  const auto& g = ds.attributes.at("grid");
  t.grid = {g.at("t0").get<double>(), g.at("dt").get<double>(), g.at("count").get<std::size_t>()};
  t.thetas = thetas_from(ds.attributes.at("thetas"));
  const Array& a = ds.array("m");
  if (a.element_count() != t.thetas.size() * t.grid.count) throw ConfigurationError("trace array shape mismatch");
  for (std::size_t i = 0; i < t.thetas.size(); ++i)
    t.values.emplace_back(a.data.begin() + static_cast<long>(i * t.grid.count),
                          a.data.begin() + static_cast<long>((i + 1) * t.grid.count));
  return t;
}

Dataset radon_bins_to_dataset(const RadonBins& rb) {
  Dataset ds;
  ds.kind = "radon_bins";
  ds.attributes["n_min"] = rb.n_min;
  ds.attributes["n_max"] = rb.n_max;
  ds.attributes["bins_per_T"] = rb.bins_per_T;
  ds.attributes["T"] = rb.T;
  ds.attributes["thetas"] = thetas_json(rb.thetas);
  ds.add(real_array("b", {rb.thetas.size(), rb.n_planes(), rb.bins_per_T}, rb.values));
  return ds;
}

RadonBins dataset_to_radon_bins(const Dataset& ds) {
  expect_kind(ds, "radon_bins");
  RadonBins rb;
  rb.n_min = ds.attributes.at("n_min").get<long>();
  rb.n_max = ds.attributes.at("n_max").get<long>();
  rb.bins_per_T = ds.attributes.at("bins_per_T").get<std::size_t>();
  rb.T = ds.attributes.at("T").get<double>();
  rb.thetas = thetas_from(ds.attributes.at("thetas"));
  rb.values = ds.array("b").data;
  if (rb.values.size() != rb.thetas.size() * rb.n_planes() * rb.bins_per_T)
    throw ConfigurationError("radon bin array shape mismatch");
  return rb;
}

Dataset rotated_to_dataset(const RotatedDataSet& r) {
  Dataset ds;
  ds.kind = "rotated_data";
  ds.attributes["units"] = units_to_json(r.units);
  ds.attributes["thetas"] = thetas_json(r.thetas);
  ds.attributes["sigmas"] = r.sigmas;
  ds.attributes["slices"] = r.slices;
  ds.attributes["polarizations"] = {"e1", "e2", "e1+e2"};
  std::vector<double> rot;
  for (const auto& R : r.rotations)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) rot.push_back(R(i, j));
  ds.add(real_array("rotations", {r.rotations.size(), 3, 3}, std::move(rot)));
  ds.add(real_array("a", {r.thetas.size(), r.rotations.size(), r.sigmas.size(), r.slices, 3, 2}, r.values));
  return ds;
}

RotatedDataSet dataset_to_rotated(const Dataset& ds) {
  expect_kind(ds, "rotated_data");
  RotatedDataSet r;
  r.units = units_from_json(ds.attributes.at("units"));
  r.thetas = thetas_from(ds.attributes.at("thetas"));
  r.sigmas = ds.attributes.at("sigmas").get<std::vector<double>>();
  r.slices = ds.attributes.at("slices").get<std::size_t>();
  const Array& rot = ds.array("rotations");
  for (std::size_t k = 0; k < rot.shape.at(0); ++k) {
    Mat3 R;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) R(i, j) = rot.data[k * 9 + static_cast<std::size_t>(3 * i + j)];
    r.rotations.push_back(R);
  }
  r.values = ds.array("a").data;
  if (r.values.size() != r.thetas.size() * r.rotations.size() * r.sigmas.size() * r.slices * 6)
    throw ConfigurationError("rotated data array shape mismatch");
  return r;
}

}  // namespace octsim
