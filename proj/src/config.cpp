#include "octsim/config.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace octsim {

using nlohmann::json;

namespace {

/// JSON value together with its path for error messages.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigurationError(path_ + ": " + msg); }

  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }
  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }

  Node at(const std::string& key) const {
    if (!j_.is_object()) fail("expected an object");
    if (!j_.contains(key)) Node(j_, path_ + "." + key).fail("missing required field");
    return Node(j_.at(key), path_ + "." + key);
  }
  Node at(std::size_t i) const { return Node(j_.at(i), path_ + "[" + std::to_string(i) + "]"); }
  std::size_t size() const {
    if (!j_.is_array()) fail("expected an array");
    return j_.size();
  }

  double number() const {
    if (!j_.is_number()) fail("expected a number");
    const double v = j_.get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }
  double positive() const {
    const double v = number();
    if (!(v > 0.0)) fail("must be positive");
    return v;
  }
  std::size_t count() const {
    if (!j_.is_number_integer() || j_.get<long long>() < 0) fail("expected a non-negative integer");
    return j_.get<std::size_t>();
  }
  long integer() const {
    if (!j_.is_number_integer()) fail("expected an integer");
    return j_.get<long>();
  }
  bool boolean() const {
    if (!j_.is_boolean()) fail("expected true or false");
    return j_.get<bool>();
  }
  std::string string() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }
  Vec3 vec3() const {
    if (!j_.is_array() || j_.size() != 3) fail("expected an array of 3 numbers");
    return Vec3(at(0).number(), at(1).number(), at(2).number());
  }
  std::vector<double> numbers() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).number());
    return out;
  }
  Mat3 mat3() const {
    if (size() != 3) fail("expected a 3x3 matrix");
    Mat3 m;
    for (std::size_t i = 0; i < 3; ++i) {
      const Vec3 row = at(i).vec3();
      m.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    return m;
  }

  double number_or(const std::string& key, double def) const { return has(key) ? at(key).number() : def; }

 private:
  const json& j_;
  std::string path_;
};

VoxelGrid parse_grid(const Node& n) {
  VoxelGrid g;
  g.origin = n.at("origin").vec3();
  g.spacing = n.at("spacing").vec3();
  const Node dims = n.at("dims");
  if (dims.size() != 3) dims.fail("expected 3 dimensions");
  for (std::size_t i = 0; i < 3; ++i) g.dims[i] = dims.at(i).count();
  if (g.dims[0] * g.dims[1] * g.dims[2] == 0) dims.fail("dimensions must be positive");
  if (!(g.spacing.minCoeff() > 0.0)) n.at("spacing").fail("spacing must be positive");
  return g;
}

TimeBins parse_bins(const Node& n) {
  TimeBins b{n.at("T").positive(), n.at("count").count()};
  if (b.count == 0) n.at("count").fail("must be positive");
  return b;
}

SpatialField parse_field(const Node& n, std::mt19937_64& rng) {
  const std::string type = n.at("type").string();
  if (type == "blobs") {
    BlobSet set;
    const Node list = n.at("blobs");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Node b = list.at(i);
      set.blobs.push_back({b.at("center").vec3(), b.at("width").positive(), b.at("amplitude").number()});
    }
    return set;
  }
  if (type == "random_blobs") {
    const std::size_t count = n.at("count").count();
    const Vec3 lo = n.at("center_min").vec3();
    const Vec3 hi = n.at("center_max").vec3();
    const auto wr = n.at("width_range").numbers();
    const auto ar = n.at("amplitude_range").numbers();
    if (wr.size() != 2 || !(wr[0] > 0.0) || wr[1] < wr[0]) n.at("width_range").fail("expected [lo, hi] with 0 < lo <= hi");
    if (ar.size() != 2 || ar[1] < ar[0]) n.at("amplitude_range").fail("expected [lo, hi] with lo <= hi");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    BlobSet set;
    for (std::size_t i = 0; i < count; ++i) {
      Vec3 c;
      for (int a = 0; a < 3; ++a) c[a] = lo[a] + (hi[a] - lo[a]) * u(rng);
      const double w = wr[0] + (wr[1] - wr[0]) * u(rng);
      const double amp = ar[0] + (ar[1] - ar[0]) * u(rng);
      set.blobs.push_back({c, w, amp});
    }
    return set;
  }
  if (type == "voxels") {
    ScalarVoxels v;
    v.grid = parse_grid(n.at("grid"));
    if (n.has("values")) {
      v.values = n.at("values").numbers();
      if (v.values.size() != v.grid.size()) n.at("values").fail("expected " + std::to_string(v.grid.size()) + " values");
    } else {
      v.values.assign(v.grid.size(), n.at("fill").number());
    }
    return v;
  }
  if (type == "axial") {
    AxialProfile prof;
    const Node list = n.at("boxes");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Node b = list.at(i);
      AxialBox box{b.at("z_lo").number(), b.at("z_hi").number(), b.at("amplitude").number()};
      if (!(box.z_hi > box.z_lo)) b.fail("needs z_hi > z_lo");
      prof.boxes.push_back(box);
    }
    return prof;
  }
  n.at("type").fail("unknown field type '" + type + "' (expected blobs, random_blobs, voxels or axial)");
}

SpatialField scale_field(SpatialField f, double s) {
  if (auto* v = std::get_if<ScalarVoxels>(&f))
    for (auto& x : v->values) x *= s;
  else if (auto* b = std::get_if<BlobSet>(&f))
    for (auto& x : b->blobs) x.amplitude *= s;
  else
    for (auto& x : std::get<AxialProfile>(f).boxes) x.amplitude *= s;
  return f;
}

}  // namespace

json load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigurationError("config: cannot open " + file.string());
  try {
    json j;
    in >> j;
    if (!j.is_object()) throw ConfigurationError("config: top level must be an object");
    return j;
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("config: malformed JSON: ") + e.what());
  }
}

std::string config_hash(const json& config) {
  const std::string text = config.dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, text.data(), text.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("SHA-256 computation failed");
  }
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

Units parse_units(const json& config) {
  Node root(config, "config");
  Units u;
  if (root.has("units")) u.c = root.at("units").at("c").positive();
  return u;
}

std::uint64_t parse_seed(const json& config) {
  Node root(config, "config");
  if (!root.has("seed")) return 0;
  const Node s = root.at("seed");
  if (!s.raw().is_number_unsigned() && !(s.raw().is_number_integer() && s.raw().get<long long>() >= 0))
    s.fail("expected a non-negative integer");
  return s.raw().get<std::uint64_t>();
}

Phantom parse_phantom(const json& config) {
  Node root(config, "config");
  const Node ph = root.at("phantom");
  std::mt19937_64 rng(parse_seed(config));
  const Units units = parse_units(config);
  const std::string kind = ph.at("kind").string();
  Phantom out;
  if (kind == "nondispersive") {
    out = NonDispersiveScalar{parse_field(ph.at("field"), rng)};
  } else if (kind == "dispersive") {
    DispersiveScalar d{parse_bins(ph.at("bins")), {}};
    if (ph.has("slices")) {
      const Node s = ph.at("slices");
      if (s.size() != d.bins.count) s.fail("expected one slice per time bin");
      for (std::size_t m = 0; m < s.size(); ++m) d.slices.push_back(parse_field(s.at(m), rng));
    } else {
      const SpatialField base = parse_field(ph.at("field"), rng);
      const Node prof = ph.at("profile");
      const auto p = prof.numbers();
      if (p.size() != d.bins.count) prof.fail("expected one value per time bin");
      for (double v : p) d.slices.push_back(scale_field(base, v));
    }
    out = d;
  } else if (kind == "layered") {
    Layered l;
    l.bins = parse_bins(ph.at("bins"));
    l.boundaries = ph.at("boundaries").numbers();
    const Node prof = ph.at("profiles");
    for (std::size_t n = 0; n < prof.size(); ++n) {
      l.profiles.push_back(prof.at(n).numbers());
      if (l.profiles.back().size() != l.bins.count) prof.at(n).fail("expected one value per time bin");
    }
    try {
      validate_phantom(l, units);
    } catch (const ConfigurationError& e) {
      ph.fail(e.what());
    }
    out = l;
  } else if (kind == "anisotropic") {
    AnisotropicMatrix a;
    a.grid = parse_grid(ph.at("grid"));
    if (ph.has("bins")) a.bins = parse_bins(ph.at("bins"));
    const std::size_t nslice = a.bins ? a.bins->count : 1;
    a.slices.assign(nslice, std::vector<Mat3>(a.grid.size(), Mat3::Zero()));
    const Node vox = ph.at("voxels");
    for (std::size_t i = 0; i < vox.size(); ++i) {
      const Node v = vox.at(i);
      const Node idx = v.at("index");
      if (idx.size() != 3) idx.fail("expected [i, j, k]");
      std::array<std::size_t, 3> ijk{idx.at(0).count(), idx.at(1).count(), idx.at(2).count()};
      for (std::size_t k = 0; k < 3; ++k)
        if (ijk[k] >= a.grid.dims[k]) idx.fail("index outside the grid");
      const std::size_t flat = a.grid.index(ijk[0], ijk[1], ijk[2]);
      if (v.has("matrices")) {
        const Node ms = v.at("matrices");
        if (ms.size() != nslice) ms.fail("expected one matrix per time bin");
        for (std::size_t s = 0; s < nslice; ++s) a.slices[s][flat] = ms.at(s).mat3();
      } else {
        const Mat3 m = v.at("matrix").mat3();
        for (std::size_t s = 0; s < nslice; ++s) a.slices[s][flat] = m;
      }
    }
    out = a;
  } else {
    ph.at("kind").fail("unknown phantom kind '" + kind + "' (expected nondispersive, dispersive, layered or anisotropic)");
  }
  try {
    validate_phantom(out, units);
  } catch (const ConfigurationError& e) {
    ph.fail(e.what());
  } catch (const InvalidArgument& e) {
    ph.fail(e.what());
  }
  return out;
}

Geometry parse_geometry(const json& config) {
  Node root(config, "config");
  const Node g = root.at("geometry");
  Geometry geo;
  geo.units = parse_units(config);
  geo.d = g.at("d").positive();
  geo.R = g.at("R").positive();
  geo.delta = g.at("delta").positive();
  const Node m = g.at("mirrors");
  geo.mirrors = {m.at("r0").number(), m.at("dr").positive(), m.at("count").count()};
  const Node dirs = g.at("directions");
  if (dirs.has("list")) {
    const Node list = dirs.at("list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Vec3 v = list.at(i).vec3();
      if (!(v.norm() > 0.0)) list.at(i).fail("direction must be nonzero");
      geo.directions.push_back(v.normalized());
    }
  } else {
    const Node n = dirs.at("grid");
    if (n.size() != 2) n.fail("expected [n1, n2]");
    const double max_tan = dirs.at("max_tan").number();
    if (max_tan < 0.0) dirs.at("max_tan").fail("must be non-negative");
    geo.directions = direction_grid(n.at(0).count(), n.at(1).count(), max_tan);
  }
  geo.polarization = g.has("polarization") ? g.at("polarization").vec3() : kE1;
  try {
    geo.validate();
  } catch (const GeometryError& e) {
    throw GeometryError(g.path() + ": " + e.what());
  }
  return geo;
}

Pulse parse_pulse(const json& config, const Geometry& geometry) {
  Node root(config, "config");
  const Node p = root.at("pulse");
  const std::string kind = p.at("kind").string();
  PulseKind k;
  if (kind == "gaussian-cosine")
    k = PulseKind::GaussianCosine;
  else if (kind == "raised-cosine")
    k = PulseKind::RaisedCosine;
  else
    p.at("kind").fail("unknown pulse kind '" + kind + "' (expected gaussian-cosine or raised-cosine)");
  try {
    return make_pulse(k, p.at("center_freq").number(), p.at("bandwidth").positive(), geometry);
  } catch (const InvalidArgument& e) {
    p.fail(e.what());
  }
}

Mat3 axis_angle_rotation(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

SimulateOptions parse_simulate(const json& config) {
  Node root(config, "config");
  SimulateOptions o;
  if (!root.has("simulate")) return o;
  const Node s = root.at("simulate");
  if (s.has("product")) {
    o.product = s.at("product").string();
    if (o.product != "measurements" && o.product != "traces" && o.product != "rotated")
      s.at("product").fail("expected measurements, traces or rotated");
  }
  if (s.has("trace")) {
    const Node t = s.at("trace");
    o.trace_grid = {t.at("t0").number(), t.at("dt").positive(), t.at("count").count()};
    if (t.has("model")) {
      const std::string model = t.at("model").string();
      if (model == "continuous")
        o.trace_model = TraceModel::Continuous;
      else if (model == "discrete")
        o.trace_model = TraceModel::Discrete;
      else
        t.at("model").fail("expected continuous or discrete");
    }
  }
  if (s.has("layered_attenuation")) o.layered_attenuation = s.at("layered_attenuation").boolean();
  if (s.has("rotations")) {
    const Node rs = s.at("rotations");
    for (std::size_t i = 0; i < rs.size(); ++i) {
      const Node r = rs.at(i);
      if (r.has("matrix")) {
        const Mat3 m = r.at("matrix").mat3();
        if ((m * m.transpose() - Mat3::Identity()).norm() > 1e-10 || m.determinant() < 0.0)
          r.at("matrix").fail("not a rotation matrix");
        o.rotations.push_back(m);
      } else {
        const Vec3 axis = r.at("axis").vec3();
        if (!(axis.norm() > 0.0)) r.at("axis").fail("axis must be nonzero");
        o.rotations.push_back(axis_angle_rotation(axis, r.at("angle").number()));
      }
    }
  }
  if (s.has("sigmas")) o.sigmas = s.at("sigmas").numbers();
  return o;
}

ReconstructOptions parse_reconstruct(const json& config) {
  Node root(config, "config");
  ReconstructOptions o;
  if (!root.has("reconstruct")) return o;
  const Node r = root.at("reconstruct");
  if (r.has("eps_f")) o.eps_f = r.at("eps_f").positive();
  if (r.has("cone_grid")) o.cone_grid = parse_grid(r.at("cone_grid"));
  if (r.has("axial")) {
    const Node a = r.at("axial");
    if (a.has("taper")) {
      o.axial.taper_fraction = a.at("taper").number();
      if (o.axial.taper_fraction < 0.0 || o.axial.taper_fraction > 1.0) a.at("taper").fail("must lie in [0, 1]");
    }
    o.axial.z0 = a.number_or("z0", 0.0);
    if (a.has("dz")) o.axial.dz = a.at("dz").positive();
    if (a.has("count")) o.axial.count = a.at("count").count();
  }
  if (r.has("dispersive")) {
    const Node d = r.at("dispersive");
    if (d.has("T")) o.T = d.at("T").positive();
    if (d.has("n_max")) o.n_max = d.at("n_max").integer();
    if (d.has("n_min")) o.n_min = d.at("n_min").integer();
    if (d.has("bins_per_T")) o.bins_per_T = d.at("bins_per_T").count();
  }
  if (r.has("layered")) {
    const Node l = r.at("layered");
    if (l.has("threshold")) o.layered.threshold = l.at("threshold").positive();
    if (l.has("window")) o.layered.window = l.at("window").count();
    if (l.has("floor")) o.layered.floor = l.at("floor").number();
    if (l.has("incident_update")) o.layered.incident_update = l.at("incident_update").boolean();
    if (l.has("bins_per_T")) o.layered.bins_per_T = l.at("bins_per_T").count();
    if (l.has("omega0")) o.layered.omega0 = l.at("omega0").positive();
  }
  return o;
}

}  // namespace octsim
