#pragma once

// Forward model: incident and mirror fields, Born far field, the exact
// dyadic-Green field used to check the far-field asymptotics, and synthesis
// of interferometric measurements.

#include "octsim/model.hpp"

#include <cstdint>
#include <vector>

namespace octsim {

/// Scattered field (E - E0)(w, x) at detector points, indexed [w][detector].
/// Entries that could not be recovered hold NaN and are flagged in `mask`
/// (per frequency) or `components` (per polarization component).
struct ScatteredSpectrum {
  std::vector<double> omegas;
  std::vector<Vec3> thetas;
  std::vector<double> rhos;
  std::vector<cplx> pulse_spectrum;  ///< f^(w) on `omegas`
  std::vector<CVec3> values;
  std::vector<std::uint8_t> mask;  ///< 1 where |f^(w)| passed the threshold
  std::array<bool, 3> components{true, true, true};

  std::size_t n_omega() const { return omegas.size(); }
  std::size_t n_det() const { return thetas.size(); }
  CVec3& at(std::size_t w, std::size_t det) { return values[w * thetas.size() + det]; }
  const CVec3& at(std::size_t w, std::size_t det) const { return values[w * thetas.size() + det]; }
};

/// Real measurements M[r][detector][j], j in {0, 1} for the field components
/// x1 and x2 (the x3 component vanishes because p_3 = 0).
struct MeasurementSet {
  Geometry geometry;
  Pulse pulse;
  std::vector<double> values;
  /// max |Im| of the raw discrete sum before Hermitian symmetrization
  double raw_imag_max = 0.0;

  std::size_t n_mirror() const { return geometry.mirrors.count; }
  std::size_t n_det() const { return geometry.directions.size(); }
  double& at(std::size_t r, std::size_t det, std::size_t j) { return values[(r * n_det() + det) * 2 + j]; }
  double at(std::size_t r, std::size_t det, std::size_t j) const {
    return values[(r * n_det() + det) * 2 + j];
  }
  double max_abs() const;
};

/// f^(w) exp(-i w x3 / c) p
CVec3 incident_spectrum(const Pulse& pulse, double omega, const Vec3& x, const Vec3& p, const Units& units = {});

/// Field reflected by an ideal mirror at position r, evaluated at (t, x).
Vec3 mirror_field(const Pulse& pulse, double r, double t, const Vec3& x, const Vec3& p, const Units& units = {});

/// Born far field at rho * theta for frequency omega != 0.
CVec3 born_farfield(const Phantom& phantom, const Pulse& pulse, double omega, const Vec3& theta, double rho,
                    const Vec3& p, const Units& units = {});

/// Same with the pulse spectrum value supplied by the caller.
CVec3 born_farfield(const Phantom& phantom, cplx pulse_hat, double omega, const Vec3& theta, double rho,
                    const Vec3& p, const Units& units);

/// (a^2 + grad div) int Gamma(x - y) phi(y) dy with Gamma(z) = exp(i a |z|)/|z|,
/// phi piecewise constant on `grid` (midpoint rule). Throws InvalidArgument
/// if x lies within one voxel of a nonzero voxel.
CVec3 dyadic_green_field(const VoxelGrid& grid, const std::vector<CVec3>& phi, double a, const Vec3& x);

/// Leading far-field term of dyadic_green_field at rho * theta:
/// -(a^2 exp(i a rho)/rho) sum_y V theta x (theta x phi(y)) exp(-i a <theta, y>).
CVec3 dyadic_farfield(const VoxelGrid& grid, const std::vector<CVec3>& phi, double a, const Vec3& theta,
                      double rho);

/// Born far-field spectrum at every detector and every frequency of the
/// grid tied to the mirror positions.
ScatteredSpectrum farfield_spectrum(const Phantom& phantom, const Pulse& pulse, const Geometry& geometry,
                                    unsigned threads = 1);

/// Interferometric measurements for every mirror position and detector.
/// The result does not depend on `threads`.
MeasurementSet synthesize_measurements(const Phantom& phantom, const Pulse& pulse, const Geometry& geometry,
                                       unsigned threads = 1);

/// Measurements from a given scattered spectrum (must live on the frequency
/// grid of `geometry.mirrors`).
MeasurementSet measurements_from_spectrum(const ScatteredSpectrum& spectrum, const Pulse& pulse,
                                          const Geometry& geometry, unsigned threads = 1);

}  // namespace octsim
