#include "octsim/model.hpp"

#include "octsim/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace octsim {

namespace {

// int_lo^hi a exp(-i k z) dz
cplx box_fourier(const AxialBox& box, double k) {
  const double w = box.z_hi - box.z_lo;
  const double mid = 0.5 * (box.z_hi + box.z_lo);
  return box.amplitude * w * std::exp(-kI * (k * mid)) * sinc(0.5 * k * w);
}

cplx voxel_fourier(const VoxelGrid& grid, const std::vector<double>& values, const Vec3& k) {
  const double vol = grid.voxel_volume();
  return vol * pairwise_sum<cplx>(values.size(), [&](std::size_t i) -> cplx {
           if (values[i] == 0.0) return cplx{};
           return values[i] * std::exp(-kI * k.dot(grid.center(i)));
         });
}

CMat3 matrix_voxel_fourier(const VoxelGrid& grid, const std::vector<Mat3>& values, const Vec3& k) {
  const double vol = grid.voxel_volume();
  CMat3 acc = pairwise_sum<CMat3>(values.size(), [&](std::size_t i) -> CMat3 {
    if (values[i].isZero(0.0)) return CMat3::Zero();
    return values[i].cast<cplx>() * std::exp(-kI * k.dot(grid.center(i)));
  });
  return vol * acc;
}

double field_top(const SpatialField& field) {
  double top = -std::numeric_limits<double>::infinity();
  if (const auto* vox = std::get_if<ScalarVoxels>(&field)) {
    for (std::size_t i = 0; i < vox->values.size(); ++i)
      if (vox->values[i] != 0.0)
        top = std::max(top, vox->grid.center(i).z() + 0.5 * vox->grid.spacing.z());
  } else if (const auto* blobs = std::get_if<BlobSet>(&field)) {
    for (const auto& b : blobs->blobs)
      if (b.amplitude != 0.0) top = std::max(top, b.center.z() + 8.0 * b.width);
  } else {
    for (const auto& box : std::get<AxialProfile>(field).boxes)
      if (box.amplitude != 0.0) top = std::max(top, box.z_hi);
  }
  return top;
}

SpatialField scale_field(const SpatialField& field, double alpha) {
  SpatialField out = field;
  if (auto* vox = std::get_if<ScalarVoxels>(&out)) {
    for (auto& v : vox->values) v *= alpha;
  } else if (auto* blobs = std::get_if<BlobSet>(&out)) {
    for (auto& b : blobs->blobs) b.amplitude *= alpha;
  } else {
    for (auto& box : std::get<AxialProfile>(out).boxes) box.amplitude *= alpha;
  }
  return out;
}

void validate_field(const SpatialField& field) {
  if (const auto* vox = std::get_if<ScalarVoxels>(&field)) {
    vox->grid.validate();
    if (vox->values.size() != vox->grid.size())
      throw ConfigurationError("voxel value count does not match grid dimensions");
    for (double v : vox->values)
      if (!std::isfinite(v)) throw ConfigurationError("voxel values must be finite");
  } else if (const auto* blobs = std::get_if<BlobSet>(&field)) {
    for (const auto& b : blobs->blobs)
      if (!(b.width > 0.0)) throw InvalidArgument("blob width must be positive");
  } else {
    for (const auto& box : std::get<AxialProfile>(field).boxes)
      if (!(box.z_hi > box.z_lo)) throw ConfigurationError("axial box needs z_hi > z_lo");
  }
}

}  // namespace

void Units::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) throw ConfigurationError("wave speed c must be positive");
}

std::array<std::size_t, 3> VoxelGrid::unravel(std::size_t flat) const {
  const std::size_t k = flat % dims[2];
  const std::size_t j = (flat / dims[2]) % dims[1];
  const std::size_t i = flat / (dims[1] * dims[2]);
  return {i, j, k};
}

Vec3 VoxelGrid::center(std::size_t flat) const {
  const auto idx = unravel(flat);
  return origin + Vec3(spacing.x() * static_cast<double>(idx[0]),
                       spacing.y() * static_cast<double>(idx[1]),
                       spacing.z() * static_cast<double>(idx[2]));
}

void VoxelGrid::validate() const {
  if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0)
    throw ConfigurationError("voxel grid dimensions must be positive");
  if (!(spacing.minCoeff() > 0.0)) throw ConfigurationError("voxel spacing must be positive");
}

double AxialProfile::value(double z) const {
  double v = 0.0;
  for (const auto& box : boxes)
    if (z >= box.z_lo && z < box.z_hi) v += box.amplitude;
  return v;
}

cplx spatial_fourier(const SpatialField& field, const Vec3& k) {
  if (const auto* vox = std::get_if<ScalarVoxels>(&field)) return voxel_fourier(vox->grid, vox->values, k);
  if (const auto* blobs = std::get_if<BlobSet>(&field)) {
    const double k2 = k.squaredNorm();
    return pairwise_sum<cplx>(blobs->blobs.size(), [&](std::size_t i) -> cplx {
      const auto& b = blobs->blobs[i];
      const double w3 = b.width * b.width * b.width;
      return b.amplitude * std::pow(2.0 * kPi, 1.5) * w3 * std::exp(-0.5 * k2 * b.width * b.width) *
             std::exp(-kI * k.dot(b.center));
    });
  }
  const auto& prof = std::get<AxialProfile>(field);
  return pairwise_sum<cplx>(prof.boxes.size(),
                            [&](std::size_t i) { return box_fourier(prof.boxes[i], k.z()); });
}

cplx TimeBins::fourier(std::size_t m, double omega) const {
  const double w = width();
  return w * std::exp(kI * (omega * center(m))) * sinc(0.5 * omega * w);
}

void TimeBins::validate() const {
  if (!(T > 0.0)) throw ConfigurationError("time support T must be positive");
  if (count == 0) throw ConfigurationError("time bin count must be positive");
}

AxialProfile Layered::slice(std::size_t m) const {
  AxialProfile prof;
  for (std::size_t n = 0; n < profiles.size(); ++n)
    prof.boxes.push_back({boundaries[n + 1], boundaries[n], profiles[n][m]});
  return prof;
}

double Layered::static_chi(std::size_t layer) const {
  double s = 0.0;
  for (double v : profiles[layer]) s += v;
  return s * bins.width();
}

bool is_anisotropic(const Phantom& phantom) {
  return std::holds_alternative<AnisotropicMatrix>(phantom);
}

cplx chi_tilde(const Phantom& phantom, double omega, const Vec3& k) {
  if (const auto* nd = std::get_if<NonDispersiveScalar>(&phantom)) return spatial_fourier(nd->field, k);
  if (const auto* ds = std::get_if<DispersiveScalar>(&phantom)) {
    return pairwise_sum<cplx>(ds->slices.size(), [&](std::size_t m) {
      return ds->bins.fourier(m, omega) * spatial_fourier(ds->slices[m], k);
    });
  }
  if (const auto* lay = std::get_if<Layered>(&phantom)) {
    return pairwise_sum<cplx>(lay->bins.count, [&](std::size_t m) {
      return lay->bins.fourier(m, omega) * spatial_fourier(SpatialField{lay->slice(m)}, k);
    });
  }
  throw InvalidArgument("scalar transform requested for an anisotropic phantom");
}

CMat3 chi_tilde_matrix(const Phantom& phantom, double omega, const Vec3& k) {
  const auto* an = std::get_if<AnisotropicMatrix>(&phantom);
  if (!an) return chi_tilde(phantom, omega, k) * CMat3::Identity();
  if (!an->bins) return matrix_voxel_fourier(an->grid, an->slices.at(0), k);
  CMat3 acc = CMat3::Zero();
  for (std::size_t m = 0; m < an->slices.size(); ++m)
    acc += an->bins->fourier(m, omega) * matrix_voxel_fourier(an->grid, an->slices[m], k);
  return acc;
}

double support_top(const Phantom& phantom) {
  double top = -std::numeric_limits<double>::infinity();
  if (const auto* nd = std::get_if<NonDispersiveScalar>(&phantom)) return field_top(nd->field);
  if (const auto* ds = std::get_if<DispersiveScalar>(&phantom)) {
    for (const auto& s : ds->slices) top = std::max(top, field_top(s));
    return top;
  }
  if (const auto* lay = std::get_if<Layered>(&phantom)) {
    for (std::size_t m = 0; m < lay->bins.count; ++m) top = std::max(top, field_top(lay->slice(m)));
    return top;
  }
  const auto& an = std::get<AnisotropicMatrix>(phantom);
  for (const auto& slice : an.slices)
    for (std::size_t i = 0; i < slice.size(); ++i)
      if (!slice[i].isZero(0.0)) top = std::max(top, an.grid.center(i).z() + 0.5 * an.grid.spacing.z());
  return top;
}

Phantom scaled(const Phantom& phantom, double alpha) {
  if (const auto* nd = std::get_if<NonDispersiveScalar>(&phantom))
    return NonDispersiveScalar{scale_field(nd->field, alpha)};
  if (const auto* ds = std::get_if<DispersiveScalar>(&phantom)) {
    DispersiveScalar out{ds->bins, {}};
    for (const auto& s : ds->slices) out.slices.push_back(scale_field(s, alpha));
    return out;
  }
  if (const auto* lay = std::get_if<Layered>(&phantom)) {
    Layered out = *lay;
    for (auto& row : out.profiles)
      for (auto& v : row) v *= alpha;
    return out;
  }
  AnisotropicMatrix out = std::get<AnisotropicMatrix>(phantom);
  for (auto& slice : out.slices)
    for (auto& m : slice) m *= alpha;
  return out;
}

void validate_phantom(const Phantom& phantom, const Units& units) {
  units.validate();
  if (const auto* nd = std::get_if<NonDispersiveScalar>(&phantom)) {
    validate_field(nd->field);
  } else if (const auto* ds = std::get_if<DispersiveScalar>(&phantom)) {
    ds->bins.validate();
    if (ds->slices.size() != ds->bins.count)
      throw ConfigurationError("dispersive phantom needs one spatial slice per time bin");
    for (const auto& s : ds->slices) validate_field(s);
  } else if (const auto* lay = std::get_if<Layered>(&phantom)) {
    lay->bins.validate();
    if (lay->boundaries.size() < 2) throw ConfigurationError("layered phantom needs at least one layer");
    if (lay->profiles.size() + 1 != lay->boundaries.size())
      throw ConfigurationError("layered phantom needs one profile per layer");
    if (lay->boundaries.back() != 0.0) throw ConfigurationError("last layer boundary must be 0");
    double min_thickness = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n + 1 < lay->boundaries.size(); ++n) {
      const double th = lay->boundaries[n] - lay->boundaries[n + 1];
      if (!(th > 0.0)) throw ConfigurationError("layer boundaries must be strictly decreasing");
      min_thickness = std::min(min_thickness, th);
    }
    for (const auto& row : lay->profiles) {
      if (row.size() != lay->bins.count)
        throw ConfigurationError("layer profile length must equal the time bin count");
      double s = 0.0;
      for (double v : row) s += v;
      if (!(s * lay->bins.width() > -1.0))
        throw ConfigurationError("layer susceptibility must exceed -1");
    }
    if (!(lay->bins.T < 2.0 * min_thickness / units.c)) {
      std::ostringstream msg;
      msg << "time support T = " << lay->bins.T << " must be below 2 min(L_n - L_{n+1}) / c = "
          << 2.0 * min_thickness / units.c << " (susceptibility time-support assumption)";
      throw ConfigurationError(msg.str());
    }
  } else {
    const auto& an = std::get<AnisotropicMatrix>(phantom);
    an.grid.validate();
    if (an.bins) an.bins->validate();
    const std::size_t want = an.bins ? an.bins->count : 1;
    if (an.slices.size() != want) throw ConfigurationError("anisotropic phantom slice count mismatch");
    for (const auto& s : an.slices)
      if (s.size() != an.grid.size())
        throw ConfigurationError("anisotropic voxel count does not match grid dimensions");
  }
}

Phantom make_gaussian_phantom(const std::vector<Vec3>& centers, const std::vector<double>& widths,
                              const std::vector<double>& amplitudes) {
  if (centers.size() != widths.size() || centers.size() != amplitudes.size())
    throw InvalidArgument("centers, widths and amplitudes must have equal length");
  BlobSet set;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    if (!(widths[i] > 0.0)) throw InvalidArgument("blob width must be positive");
    set.blobs.push_back({centers[i], widths[i], amplitudes[i]});
  }
  return NonDispersiveScalar{std::move(set)};
}

// ---------------------------------------------------------------------------

void Geometry::validate() const {
  units.validate();
  if (!(delta > 0.0)) throw GeometryError("safety margin delta must be positive");
  if (!(R > delta && R < d - 2.0 * delta)) {
    std::ostringstream msg;
    msg << "need delta < R < d - 2 delta, got R = " << R << ", delta = " << delta << ", d = " << d;
    throw GeometryError(msg.str());
  }
  if (mirrors.count == 0) throw GeometryError("mirror grid is empty");
  if (mirrors.count > 1 && !(mirrors.dr > 0.0)) throw GeometryError("mirror spacing must be positive");
  if (!(mirrors.last() < R)) throw GeometryError("mirror positions must stay below R");
  if (polarization.z() != 0.0) throw GeometryError("polarization must satisfy p_3 = 0");
  if (!(polarization.norm() > 0.0)) throw GeometryError("polarization must be nonzero");
  if (directions.empty()) throw GeometryError("no detector directions");
  for (const auto& th : directions) {
    if (std::abs(th.norm() - 1.0) > 1e-12) throw GeometryError("detector direction is not a unit vector");
    if (!(th.z() > 0.0)) throw GeometryError("detector direction needs theta_3 > 0");
  }
}

void Geometry::validate_phantom(const Phantom& phantom) const {
  const double top = support_top(phantom);
  if (!(top < R - delta)) {
    std::ostringstream msg;
    msg << "phantom support reaches x3 = " << top << ", must stay below R - delta = " << R - delta;
    throw GeometryError(msg.str());
  }
}

std::optional<std::size_t> Geometry::axial_direction() const {
  for (std::size_t i = 0; i < directions.size(); ++i)
    if ((directions[i] - kE3).norm() < 1e-12) return i;
  return std::nullopt;
}

std::vector<Vec3> direction_grid(std::size_t n1, std::size_t n2, double max_tan) {
  auto axis = [max_tan](std::size_t n, std::size_t i) {
    if (n == 1) return 0.0;
    return -max_tan + 2.0 * max_tan * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  std::vector<Vec3> out;
  out.reserve(n1 * n2);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) out.push_back(Vec3(axis(n1, i), axis(n2, j), 1.0).normalized());
  return out;
}

// ---------------------------------------------------------------------------

Pulse::Pulse(double t0, double dt, std::vector<double> samples, double support_lo, double support_hi,
             double center_freq)
    : t0_(t0), dt_(dt), samples_(std::move(samples)), support_lo_(support_lo), support_hi_(support_hi),
      center_freq_(center_freq) {
  if (!(dt_ > 0.0)) throw InvalidArgument("pulse time step must be positive");
  if (!(support_hi_ > support_lo_)) throw InvalidArgument("pulse support window is empty");
  double peak = 0.0;
  for (double v : samples_) {
    if (!std::isfinite(v)) throw InvalidArgument("pulse samples must be finite");
    peak = std::max(peak, std::abs(v));
  }
  double outside = 0.0;
  double worst_t = 0.0;
  for (std::size_t k = 0; k < samples_.size(); ++k) {
    const double t = time(k);
    if ((t <= support_lo_ || t >= support_hi_) && std::abs(samples_[k]) > outside) {
      outside = std::abs(samples_[k]);
      worst_t = t;
    }
  }
  if (outside > 1e-12 * peak) {
    std::ostringstream msg;
    msg << "pulse value " << outside << " at t = " << worst_t << " lies outside the support window ("
        << support_lo_ << ", " << support_hi_ << ")";
    throw InvalidArgument(msg.str());
  }
}

double Pulse::value(double t) const {
  if (samples_.empty()) return 0.0;
  const double s = (t - t0_) / dt_;
  if (s < 0.0 || s > static_cast<double>(samples_.size() - 1)) return 0.0;
  const auto k = static_cast<std::size_t>(std::floor(s));
  if (k + 1 >= samples_.size()) return samples_.back();
  const double frac = s - static_cast<double>(k);
  return (1.0 - frac) * samples_[k] + frac * samples_[k + 1];
}

cplx Pulse::spectrum(double omega) const {
  return dt_ * pairwise_sum<cplx>(samples_.size(), [&](std::size_t k) -> cplx {
           if (samples_[k] == 0.0) return cplx{};
           return samples_[k] * std::exp(kI * (omega * time(k)));
         });
}

Pulse make_pulse(PulseKind kind, double center_freq, double bandwidth, const Geometry& geometry) {
  if (!(center_freq >= 0.0)) throw InvalidArgument("pulse centre frequency must be non-negative");
  if (!(bandwidth > 0.0)) throw InvalidArgument("pulse bandwidth must be positive");
  const double c = geometry.units.c;
  const double lo = geometry.R / c;
  const double hi = (geometry.R + 2.0 * geometry.delta) / c;
  const double tc = 0.5 * (lo + hi);
  const double half_window = geometry.delta / c;

  double half_extent = 0.0;
  double omega_top = 0.0;
  if (kind == PulseKind::GaussianCosine) {
    // exp(-x^2 / 2) < 1e-12 needs x > sqrt(24 ln 10) in units of the temporal width
    const double sigma_t = 1.0 / bandwidth;
    half_extent = std::sqrt(24.0 * std::log(10.0)) * sigma_t;
    omega_top = center_freq + 10.0 * bandwidth;
  } else {
    half_extent = 2.0 * kPi / bandwidth;
    omega_top = center_freq + 16.0 * bandwidth;
  }
  if (half_extent >= half_window) {
    std::ostringstream msg;
    msg << "pulse envelope half-extent " << half_extent << " exceeds the support half-width delta/c = "
        << half_window;
    throw InvalidArgument(msg.str());
  }

  const double dt = kPi / (4.0 * omega_top);
  const auto half_n = static_cast<std::size_t>(std::ceil(half_window / dt)) + 2;
  const double t0 = tc - dt * static_cast<double>(half_n);
  std::vector<double> samples(2 * half_n + 1, 0.0);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double s = t0 + dt * static_cast<double>(k) - tc;
    if (std::abs(s) >= half_extent) continue;
    double env = 0.0;
    if (kind == PulseKind::GaussianCosine) {
      env = std::exp(-0.5 * s * s * bandwidth * bandwidth);
    } else {
      env = 0.5 * (1.0 + std::cos(kPi * s / half_extent));
    }
    samples[k] = env * std::cos(center_freq * s);
  }
  return Pulse(t0, dt, std::move(samples), lo, hi, center_freq);
}

// ---------------------------------------------------------------------------

FrequencyGrid FrequencyGrid::from_mirrors(const MirrorGrid& mirrors, const Units& units) {
  if (mirrors.count < 4 || mirrors.count % 2 != 0)
    throw ConfigurationError("mirror count must be even and at least 4 for the frequency grid");
  if (!(mirrors.dr > 0.0)) throw ConfigurationError("mirror spacing must be positive");
  FrequencyGrid g;
  const auto n = static_cast<long>(mirrors.count);
  g.step_ = kPi * units.c / (static_cast<double>(n) * mirrors.dr);
  for (long m = -(n / 2 - 1); m <= n / 2 - 1; ++m)
    if (m != 0) g.values_.push_back(g.step_ * static_cast<double>(m));
  return g;
}

}  // namespace octsim
