#pragma once

// Tilted planes E_{sigma,theta} = { y : <theta + e3, y> = c sigma }, plane
// integrals of phantoms over them, and the time trace m(t, theta) whose
// Fourier transform is chi~(w, (w/c)(theta + e3)).

#include "octsim/model.hpp"

#include <vector>

namespace octsim {

struct PlaneSpec {
  double sigma = 0.0;
  Vec3 theta = kE3;
};

/// Area element of the graph parametrisation
/// psi(x1, x2) = (x1, x2, (c sigma - theta1 x1 - theta2 x2)/(1 + theta3)).
double plane_gram_factor(const Vec3& theta);

/// Surface integral of the field over the plane. Blobs are integrated in
/// closed form, voxel fields exactly as piecewise-constant boxes (each voxel
/// contributes value * area of its cross-section, with half-open faces along
/// x3), axial profiles as gram * chi(c sigma / (1 + theta3)).
/// `origin` is the (x1, x2) reference point used by the voxel polygon sums.
double plane_integral(const SpatialField& field, const PlaneSpec& plane, const Units& units = {},
                      const Eigen::Vector2d& origin = Eigen::Vector2d::Zero());

/// Matrix plane integral of one time slice of an anisotropic phantom.
Mat3 plane_integral(const AnisotropicMatrix& phantom, std::size_t slice, const PlaneSpec& plane,
                    const Units& units = {});

/// Area of the cross-section of the axis-aligned box [lo, hi) with the plane.
double box_section_area(const Vec3& lo, const Vec3& hi, const PlaneSpec& plane, const Units& units = {},
                        const Eigen::Vector2d& origin = Eigen::Vector2d::Zero());

/// Uniform time sampling t_k = t0 + k dt.
struct TimeGrid {
  double t0 = 0.0;
  double dt = 1.0;
  std::size_t count = 0;

  double time(std::size_t k) const { return t0 + dt * static_cast<double>(k); }
};

/// Sampled traces m(t, theta), values indexed [theta][k].
struct TraceSet {
  std::vector<Vec3> thetas;
  TimeGrid grid;
  Units units;
  std::vector<std::vector<double>> values;
};

enum class TraceModel {
  /// m(t) = (c / |theta + e3|) int b(tau; tau - t, theta) d tau
  Continuous,
  /// same with b(tau; sigma) replaced by the plane sample b_n(tau) at
  /// sigma = n T, n = floor(sigma / T + 1/2)
  Discrete,
};

/// Smallest and largest plane index n (sigma = n T) meeting the support of
/// the phantom for direction theta.
std::pair<long, long> plane_index_range(const DispersiveScalar& phantom, const Vec3& theta,
                                        const Units& units = {});

/// Trace of a dispersive scalar phantom sampled on `grid`.
std::vector<double> trace_from_phantom(const DispersiveScalar& phantom, const Vec3& theta, const TimeGrid& grid,
                                       TraceModel model = TraceModel::Continuous, const Units& units = {});

/// Plane data b_n(tau_m, theta) on a window of plane indices, piecewise
/// constant over `bins_per_T` uniform sub-bins of [0, T].
struct RadonBins {
  long n_min = 0;
  long n_max = -1;
  std::size_t bins_per_T = 8;
  double T = 1.0;
  std::vector<Vec3> thetas;
  std::vector<double> values;  ///< [theta][n - n_min][m]

  std::size_t n_planes() const { return static_cast<std::size_t>(n_max - n_min + 1); }
  double tau(std::size_t m) const { return T * (static_cast<double>(m) + 0.5) / static_cast<double>(bins_per_T); }
  double& at(std::size_t th, long n, std::size_t m) {
    return values[(th * n_planes() + static_cast<std::size_t>(n - n_min)) * bins_per_T + m];
  }
  double at(std::size_t th, long n, std::size_t m) const {
    return values[(th * n_planes() + static_cast<std::size_t>(n - n_min)) * bins_per_T + m];
  }
};

/// RadonBins of a dispersive phantom sampled at the bin centres.
RadonBins radon_bins_from_phantom(const DispersiveScalar& phantom, const std::vector<Vec3>& thetas, long n_min,
                                  long n_max, std::size_t bins_per_T, const Units& units = {});

/// Discrete defining sum
/// m(t) = (c / |theta + e3|) int_0^T b_{N(tau - t)}(tau) d tau
/// for piecewise-constant bins.
std::vector<double> discrete_forward_trace(const RadonBins& bins, std::size_t theta_index, const TimeGrid& grid,
                                           const Units& units = {});

}  // namespace octsim
