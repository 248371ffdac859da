#pragma once

// Matrix-valued susceptibilities: the 2x2 block visible from one direction,
// rotated-sample data and recovery of the full matrix from three rotations.

#include "octsim/radon.hpp"

#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace octsim {

enum class Pol { E1, E2, E1E2 };

Vec3 polarization_vector(Pol p);

/// Scalar data a_{p,j} keyed by (polarization, component j in {1, 2}).
using PolarizationData = std::map<std::pair<Pol, int>, double>;

/// a_{p,j} = p_j [theta x (theta x X p)]_j for the three polarizations.
PolarizationData polarization_data(const Mat3& X, const Vec3& theta);

/// B = [[-a_{e1,1}, a_{e1,1} - a_{e1+e2,1}], [a_{e2,2} - a_{e1+e2,2}, -a_{e2,2}]],
/// the upper-left block of (1 - theta theta^T) X.
Mat2 anisotropic_B(const PolarizationData& a);

struct RotatedDirection {
  Vec3 theta;
  double alpha = 1.0;
};

/// theta_R with theta_R + e3 = alpha R (theta + e3), |theta_R| = 1,
/// theta_R3 > 0; empty when no such direction exists.
std::optional<RotatedDirection> rotated_direction(const Mat3& R, const Vec3& theta);

/// p_j [theta_R x (theta_R x R b(tau; sigma, theta) R^T p)]_j, the data of
/// the rotated sample on the plane (alpha_R sigma, theta_R). `slice` picks the
/// time bin containing tau (0 for non-dispersive phantoms).
std::optional<double> rotated_measurement_data(const AnisotropicMatrix& phantom, const Mat3& R, const Vec3& theta,
                                               double sigma, std::size_t slice, Pol p, int j,
                                               const Units& units = {});

/// B_R = upper-left block of (1 - theta_R theta_R^T) R X R^T, evaluated
/// directly; a generator for consistent data.
Mat2 rotated_block(const Mat3& X, const Mat3& R, const Vec3& theta);

struct AnisotropicSolution {
  Mat3 X = Mat3::Zero();
  double residual = 0.0;  ///< Frobenius norm of the stacked equation residual
  /// smallest singular value over the triples of {R_i^T e3, theta + e3}
  double min_triple_singular_value = 0.0;
};

/// Recovers X from the blocks B_R of three rotations via the projection onto
/// (theta + e3)^perp followed by the rank-one remainder.
AnisotropicSolution anisotropic_solve(const Vec3& theta, const std::vector<Mat3>& rotations,
                                      const std::vector<Mat2>& blocks);

}  // namespace octsim
