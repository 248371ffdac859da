#pragma once

#include <Eigen/Dense>

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace octsim {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using CMat2 = Eigen::Matrix2cd;
using CMat3 = Eigen::Matrix3cd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr cplx kI{0.0, 1.0};

inline const Vec3 kE1{1.0, 0.0, 0.0};
inline const Vec3 kE2{0.0, 1.0, 0.0};
inline const Vec3 kE3{0.0, 0.0, 1.0};

// Error taxonomy. The CLI maps these onto its exit codes (see pipeline.hpp).

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed a value outside an operation's domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Inconsistent run configuration (grids, schema, constraint checks).
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Measurement geometry violates the admissibility constraints.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Data exists but carries no usable information (empty band, no samples).
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

/// Sampled data does not cover the requested index window.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Dataset kind or content does not fit the requested reconstruction mode.
class ModeMismatchError : public Error {
 public:
  using Error::Error;
};

class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

/// Over-determined system has no consistent solution within tolerance.
class InconsistentDataError : public Error {
 public:
  using Error::Error;
};

class DetectionFailure : public Error {
 public:
  DetectionFailure(const std::string& what, std::string diagnostic)
      : Error(what), diagnostic_(std::move(diagnostic)) {}
  const std::string& diagnostic() const { return diagnostic_; }

 private:
  std::string diagnostic_;
};

}  // namespace octsim
