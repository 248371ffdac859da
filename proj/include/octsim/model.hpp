#pragma once

// Domain types shared by every module: units, phantoms, the illumination
// pulse, the measurement geometry and the frequency grid tied to it.
//
// Conventions used throughout the library:
//   temporal transform   f^(w)   = int f(t) exp(+i w t) dt
//   spatial transform    chi~(k) = int chi(x) exp(-i <k, x>) dx
//   inverses carry 1/(2 pi) per dimension.
// Discrete transforms apply the continuum step factors (dt, dw, voxel volume)
// explicitly so that sampled quantities approximate the continuum ones.

#include "octsim/types.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

namespace octsim {

struct Units {
  double c = 1.0;  ///< wave speed (length / time)

  void validate() const;
};

// ---------------------------------------------------------------------------
// Spatial fields
// ---------------------------------------------------------------------------

/// Regular voxel grid. `origin` is the centre of voxel (0,0,0); values are
/// stored row-major with the x1 index slowest.
struct VoxelGrid {
  Vec3 origin = Vec3::Zero();
  Vec3 spacing = Vec3::Ones();
  std::array<std::size_t, 3> dims{0, 0, 0};

  std::size_t size() const { return dims[0] * dims[1] * dims[2]; }
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return (i * dims[1] + j) * dims[2] + k;
  }
  std::array<std::size_t, 3> unravel(std::size_t flat) const;
  Vec3 center(std::size_t flat) const;
  double voxel_volume() const { return spacing.prod(); }
  void validate() const;
};

struct GaussianBlob {
  Vec3 center = Vec3::Zero();
  double width = 1.0;  ///< standard deviation of the Gaussian
  double amplitude = 0.0;
};

/// chi(x) = amplitude on [z_lo, z_hi) along the optical axis.
struct AxialBox {
  double z_lo = 0.0;
  double z_hi = 0.0;
  double amplitude = 0.0;
};

struct ScalarVoxels {
  VoxelGrid grid;
  std::vector<double> values;
};

struct BlobSet {
  std::vector<GaussianBlob> blobs;
};

/// Focused-illumination profile chi(x) = delta(x1) delta(x2) sum_b box_b(x3).
struct AxialProfile {
  std::vector<AxialBox> boxes;

  double value(double z) const;
};

using SpatialField = std::variant<ScalarVoxels, BlobSet, AxialProfile>;

/// Spatial Fourier transform chi~(k). Blobs and boxes are closed-form, voxel
/// grids use the midpoint rule (each voxel as a point sample times volume).
cplx spatial_fourier(const SpatialField& field, const Vec3& k);

// ---------------------------------------------------------------------------
// Time bins of dispersive susceptibilities
// ---------------------------------------------------------------------------

/// Uniform partition of the susceptibility time support [0, T].
struct TimeBins {
  double T = 1.0;
  std::size_t count = 1;

  double width() const { return T / static_cast<double>(count); }
  double lo(std::size_t m) const { return width() * static_cast<double>(m); }
  double hi(std::size_t m) const { return width() * static_cast<double>(m + 1); }
  double center(std::size_t m) const { return width() * (static_cast<double>(m) + 0.5); }
  /// int_{bin m} exp(i w tau) d tau
  cplx fourier(std::size_t m, double omega) const;
  void validate() const;
};

// ---------------------------------------------------------------------------
// Phantoms
// ---------------------------------------------------------------------------

/// chi(t, x) = delta(t) chi^(x): frequency independent.
struct NonDispersiveScalar {
  SpatialField field;
};

/// chi(tau, x) = slices[m](x) for tau in bin m.
struct DispersiveScalar {
  TimeBins bins;
  std::vector<SpatialField> slices;
};

/// Focused layered medium: boundaries L_1 > ... > L_{N+1} = 0, layer n
/// occupying [L_{n+1}, L_n) with time profile profiles[n][m].
struct Layered {
  std::vector<double> boundaries;
  TimeBins bins;
  std::vector<std::vector<double>> profiles;

  std::size_t layer_count() const { return profiles.size(); }
  /// Axial profile of chi(tau, .) for tau in bin m.
  AxialProfile slice(std::size_t m) const;
  /// int chi_n(tau) d tau, the zero-frequency susceptibility of layer n.
  double static_chi(std::size_t layer) const;
};

/// Matrix-valued susceptibility on a voxel grid; non-dispersive when `bins`
/// is empty (then `slices` holds exactly one field).
struct AnisotropicMatrix {
  VoxelGrid grid;
  std::optional<TimeBins> bins;
  std::vector<std::vector<Mat3>> slices;
};

using Phantom = std::variant<NonDispersiveScalar, DispersiveScalar, Layered, AnisotropicMatrix>;

bool is_anisotropic(const Phantom& phantom);

/// Space-time transform chi~(w, k) of a scalar phantom.
cplx chi_tilde(const Phantom& phantom, double omega, const Vec3& k);

/// Space-time transform as a matrix; scalar phantoms give chi~ * identity.
CMat3 chi_tilde_matrix(const Phantom& phantom, double omega, const Vec3& k);

/// Highest x3 reached by the (numerical) support. Gaussian blobs count as
/// supported within 8 widths of their centre.
double support_top(const Phantom& phantom);

/// alpha * chi.
Phantom scaled(const Phantom& phantom, double alpha);

/// Structural checks (sizes, ordering, positivity, time-support bound).
void validate_phantom(const Phantom& phantom, const Units& units);

Phantom make_gaussian_phantom(const std::vector<Vec3>& centers, const std::vector<double>& widths,
                              const std::vector<double>& amplitudes);

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Uniform mirror positions r_k = r0 + k dr.
struct MirrorGrid {
  double r0 = 0.0;
  double dr = 0.0;
  std::size_t count = 0;

  double position(std::size_t k) const { return r0 + dr * static_cast<double>(k); }
  double last() const { return position(count - 1); }
};

struct Geometry {
  double d = 0.0;      ///< detector plane height
  double R = 0.0;      ///< upper bound of mirror positions
  double delta = 0.0;  ///< safety margin
  MirrorGrid mirrors;
  std::vector<Vec3> directions;  ///< detector directions theta, theta_3 > 0
  Vec3 polarization = kE1;
  Units units;

  void validate() const;
  /// Rejects phantoms reaching above R - delta.
  void validate_phantom(const Phantom& phantom) const;
  double detector_distance(std::size_t det) const { return d / directions[det].z(); }
  Vec3 detector_point(std::size_t det) const { return detector_distance(det) * directions[det]; }
  /// Index of the direction equal to e3, if present.
  std::optional<std::size_t> axial_direction() const;
};

/// Directions normalize(t1, t2, 1) on an n1 x n2 grid of tangents in
/// [-max_tan, max_tan]; odd sizes include e3.
std::vector<Vec3> direction_grid(std::size_t n1, std::size_t n2, double max_tan);

// ---------------------------------------------------------------------------
// Pulse
// ---------------------------------------------------------------------------

enum class PulseKind { GaussianCosine, RaisedCosine };

/// Axial envelope f(t) sampled on t_k = t0 + k dt; zero outside the samples.
class Pulse {
 public:
  Pulse() = default;
  /// Throws InvalidArgument unless max |f| outside (support_lo, support_hi)
  /// stays below 1e-12 max |f|.
  Pulse(double t0, double dt, std::vector<double> samples, double support_lo, double support_hi,
        double center_freq = 0.0);

  double t0() const { return t0_; }
  double dt() const { return dt_; }
  const std::vector<double>& samples() const { return samples_; }
  double support_lo() const { return support_lo_; }
  double support_hi() const { return support_hi_; }
  double center_frequency() const { return center_freq_; }
  double time(std::size_t k) const { return t0_ + dt_ * static_cast<double>(k); }

  /// Linear interpolation of the samples.
  double value(double t) const;
  /// f^(w) = sum_k f(t_k) exp(i w t_k) dt
  cplx spectrum(double omega) const;

 private:
  double t0_ = 0.0;
  double dt_ = 1.0;
  std::vector<double> samples_;
  double support_lo_ = 0.0;
  double support_hi_ = 0.0;
  double center_freq_ = 0.0;
};

/// Builds a pulse centred in the window (R/c, R/c + 2 delta/c).
/// `bandwidth` is the spectral width: the Gaussian standard deviation for
/// GaussianCosine, the main-lobe half-width 2 pi / h for RaisedCosine with
/// temporal half-extent h.
Pulse make_pulse(PulseKind kind, double center_freq, double bandwidth, const Geometry& geometry);

// ---------------------------------------------------------------------------
// Frequency grid
// ---------------------------------------------------------------------------

/// Angular frequencies w_m = m dw, 0 < |m| < N/2, with dw = pi c / (N dr) so
/// that 2 dr / c is the time step of an exact length-N DFT pair over the
/// mirror positions.
class FrequencyGrid {
 public:
  static FrequencyGrid from_mirrors(const MirrorGrid& mirrors, const Units& units);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  double step() const { return step_; }
  /// Index of -w_i.
  std::size_t conjugate(std::size_t i) const { return values_.size() - 1 - i; }

 private:
  std::vector<double> values_;
  double step_ = 0.0;
};

}  // namespace octsim
