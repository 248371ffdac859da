#include "octsim/anisotropic.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <sstream>

namespace octsim {

namespace {

// theta x (theta x q) = -(1 - theta theta^T) q
Mat3 transverse(const Vec3& theta) { return Mat3::Identity() - theta * theta.transpose(); }

Eigen::Matrix<double, 2, 3> select12() {
  Eigen::Matrix<double, 2, 3> P = Eigen::Matrix<double, 2, 3>::Zero();
  P(0, 0) = 1.0;
  P(1, 1) = 1.0;
  return P;
}

Eigen::VectorXd solve_checked(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const char* what) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv(sv.size() - 1) > 1e-12 * sv(0))) {
    std::ostringstream msg;
    msg << what << " is rank deficient (singular values " << sv.transpose() << ")";
    throw GeometryError(msg.str());
  }
  return svd.solve(b);
}

}  // namespace

Vec3 polarization_vector(Pol p) {
  switch (p) {
    case Pol::E1:
      return kE1;
    case Pol::E2:
      return kE2;
    case Pol::E1E2:
      return kE1 + kE2;
  }
  return Vec3::Zero();
}

PolarizationData polarization_data(const Mat3& X, const Vec3& theta) {
  PolarizationData a;
  for (Pol p : {Pol::E1, Pol::E2, Pol::E1E2}) {
    const Vec3 pv = polarization_vector(p);
    const Vec3 q = theta.cross(theta.cross(X * pv));
    for (int j = 1; j <= 2; ++j) a[{p, j}] = pv[j - 1] * q[j - 1];
  }
  return a;
}

Mat2 anisotropic_B(const PolarizationData& a) {
  auto get = [&](Pol p, int j) {
    const auto it = a.find({p, j});
    if (it == a.end()) {
      static const char* names[] = {"e1", "e2", "e1+e2"};
      throw InvalidArgument(std::string("missing polarization data a_{") + names[static_cast<int>(p)] + "," +
                            std::to_string(j) + "}");
    }
    return it->second;
  };
  const double a11 = get(Pol::E1, 1);
  const double a22 = get(Pol::E2, 2);
  const double a31 = get(Pol::E1E2, 1);
  const double a32 = get(Pol::E1E2, 2);
  Mat2 B;
  B << -a11, a11 - a31, a22 - a32, -a22;
  return B;
}

std::optional<RotatedDirection> rotated_direction(const Mat3& R, const Vec3& theta) {
  if (!(theta.z() > 0.0)) throw InvalidArgument("detector direction needs theta_3 > 0");
  const Vec3 u = R * (theta + kE3);
  if (!(u.z() > 0.0)) return std::nullopt;
  const double alpha = 2.0 * u.z() / u.squaredNorm();
  const Vec3 th = alpha * u - kE3;
  if (!(th.z() > 0.0)) return std::nullopt;
  return RotatedDirection{th, alpha};
}

std::optional<double> rotated_measurement_data(const AnisotropicMatrix& phantom, const Mat3& R, const Vec3& theta,
                                               double sigma, std::size_t slice, Pol p, int j, const Units& units) {
  if (j != 1 && j != 2) throw InvalidArgument("component index j must be 1 or 2");
  const auto rd = rotated_direction(R, theta);
  if (!rd) return std::nullopt;
  const Mat3 b = plane_integral(phantom, slice, {sigma, theta}, units);
  const Vec3 pv = polarization_vector(p);
  const Vec3 q = rd->theta.cross(rd->theta.cross(R * b * R.transpose() * pv));
  return pv[j - 1] * q[j - 1];
}

Mat2 rotated_block(const Mat3& X, const Mat3& R, const Vec3& theta) {
  const auto rd = rotated_direction(R, theta);
  if (!rd) throw GeometryError("rotation admits no rotated detector direction");
  return anisotropic_B(polarization_data(R * X * R.transpose(), rd->theta));
}

AnisotropicSolution anisotropic_solve(const Vec3& theta, const std::vector<Mat3>& rotations,
                                      const std::vector<Mat2>& blocks) {
  if (rotations.size() != 3 || blocks.size() != 3)
    throw InvalidArgument("anisotropic solve needs exactly three rotations and three data blocks");
  if (!(theta.z() > 0.0)) throw InvalidArgument("detector direction needs theta_3 > 0");
  const Vec3 v = theta + kE3;
  const auto P = select12();

  // Independence of every triple drawn from {R_i^T e3, theta + e3}.
  std::vector<Vec3> dirs;
  for (const auto& R : rotations) dirs.push_back(R.transpose() * kE3);
  dirs.push_back(v.normalized());
  AnisotropicSolution sol;
  sol.min_triple_singular_value = std::numeric_limits<double>::infinity();
  for (std::size_t skip = 0; skip < 4; ++skip) {
    Mat3 M;
    int col = 0;
    for (std::size_t i = 0; i < 4; ++i)
      if (i != skip) M.col(col++) = dirs[i];
    Eigen::JacobiSVD<Mat3> svd(M);
    sol.min_triple_singular_value = std::min(sol.min_triple_singular_value, svd.singularValues()(2));
  }
  if (!(sol.min_triple_singular_value > 1e-6)) {
    std::ostringstream msg;
    msg << "rotation set is degenerate: smallest triple singular value " << sol.min_triple_singular_value;
    throw GeometryError(msg.str());
  }

  std::vector<RotatedDirection> rds;
  for (const auto& R : rotations) {
    const auto rd = rotated_direction(R, theta);
    if (!rd) throw GeometryError("a rotation admits no rotated detector direction");
    rds.push_back(*rd);
  }

  // Y = P_v X: eta^T Y R^T P^T = (P R eta)^T B_R for each R, plus v^T Y = 0.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(9, 9);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(9);
  int row = 0;
  for (std::size_t r = 0; r < 3; ++r) {
    const Mat3& R = rotations[r];
    const Vec3 eta = v.cross(R.transpose() * kE3).normalized();
    const Eigen::Vector2d lhs_vec = P * R * eta;
    const Eigen::RowVector2d target = lhs_vec.transpose() * blocks[r];
    for (int b = 0; b < 2; ++b, ++row) {
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) A(row, 3 * i + j) = eta[i] * R(b, j);
      rhs(row) = target(b);
    }
  }
  for (int j = 0; j < 3; ++j, ++row) {
    for (int i = 0; i < 3; ++i) A(row, 3 * i + j) = v[i];
  }
  const Eigen::VectorXd y = solve_checked(A, rhs, "projected system");
  Mat3 Y;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) Y(i, j) = y(3 * i + j);

  // Rank-one remainder v w^T:
  // -(theta_R3 / alpha) (P theta_R)(P R w)^T = B_R - P P_{theta_R} R Y R^T P^T.
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(12, 3);
  Eigen::VectorXd wr = Eigen::VectorXd::Zero(12);
  row = 0;
  for (std::size_t r = 0; r < 3; ++r) {
    const Mat3& R = rotations[r];
    const Vec3& th = rds[r].theta;
    const Mat2 C = blocks[r] - P * transverse(th) * R * Y * R.transpose() * P.transpose();
    const double s = -th.z() / rds[r].alpha;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b, ++row) {
        for (int j = 0; j < 3; ++j) W(row, j) = s * th[a] * R(b, j);
        wr(row) = C(a, b);
      }
  }
  const Eigen::VectorXd w = solve_checked(W, wr, "rank-one system");
  sol.X = Y + v * w.transpose();

  double res2 = 0.0;
  double norm2 = 0.0;
  for (std::size_t r = 0; r < 3; ++r) {
    const Mat3& R = rotations[r];
    const Mat2 pred = P * transverse(rds[r].theta) * R * sol.X * R.transpose() * P.transpose();
    res2 += (pred - blocks[r]).squaredNorm();
    norm2 += blocks[r].squaredNorm();
  }
  sol.residual = std::sqrt(res2);
  if (sol.residual > 1e-8 * std::sqrt(norm2)) {
    std::ostringstream msg;
    msg << "data blocks are inconsistent: residual " << sol.residual << " vs data norm " << std::sqrt(norm2);
    throw InconsistentDataError(msg.str());
  }
  return sol;
}

}  // namespace octsim
