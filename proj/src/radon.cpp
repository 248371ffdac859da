#include "octsim/radon.hpp"

#include "octsim/numeric.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace octsim {

namespace {

using Vec2 = Eigen::Vector2d;

// Clip a convex polygon by g(x) = <a, x> <= b.
std::vector<Vec2> clip(const std::vector<Vec2>& poly, const Vec2& a, double b) {
  std::vector<Vec2> out;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    const double fp = a.dot(p) - b;
    const double fq = a.dot(q) - b;
    if (fp <= 0.0) out.push_back(p);
    if ((fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0)) out.push_back(p + (fp / (fp - fq)) * (q - p));
  }
  return out;
}

double shoelace(const std::vector<Vec2>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    a += p.x() * q.y() - p.y() * q.x();
  }
  return 0.5 * std::abs(a);
}

// Range of s = <theta + e3, y> / c over the box.
std::pair<double, double> box_sigma_range(const Vec3& lo, const Vec3& hi, const Vec3& v, double c) {
  double smin = 0.0;
  double smax = 0.0;
  for (int i = 0; i < 3; ++i) {
    smin += v[i] * (v[i] >= 0.0 ? lo[i] : hi[i]);
    smax += v[i] * (v[i] >= 0.0 ? hi[i] : lo[i]);
  }
  return {smin / c, smax / c};
}

// sigma range of one spatial field's support.
std::pair<double, double> field_sigma_range(const SpatialField& field, const Vec3& theta, double c) {
  const Vec3 v = theta + kE3;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  if (const auto* vox = std::get_if<ScalarVoxels>(&field)) {
    for (std::size_t i = 0; i < vox->values.size(); ++i) {
      if (vox->values[i] == 0.0) continue;
      const Vec3 ctr = vox->grid.center(i);
      const auto [a, b] = box_sigma_range(ctr - 0.5 * vox->grid.spacing, ctr + 0.5 * vox->grid.spacing, v, c);
      lo = std::min(lo, a);
      hi = std::max(hi, b);
    }
  } else if (const auto* blobs = std::get_if<BlobSet>(&field)) {
    for (const auto& b : blobs->blobs) {
      if (b.amplitude == 0.0) continue;
      const double mu = v.dot(b.center) / c;
      const double half = 8.0 * b.width * v.norm() / c;
      lo = std::min(lo, mu - half);
      hi = std::max(hi, mu + half);
    }
  } else {
    for (const auto& box : std::get<AxialProfile>(field).boxes) {
      if (box.amplitude == 0.0) continue;
      lo = std::min(lo, box.z_lo * v.z() / c);
      hi = std::max(hi, box.z_hi * v.z() / c);
    }
  }
  return {lo, hi};
}

long plane_index(double sigma, double T) { return static_cast<long>(std::floor(sigma / T + 0.5)); }

// int_{s1}^{s2} b(sigma) d sigma for one spatial field.
double sigma_integral(const SpatialField& field, const Vec3& theta, double s1, double s2, const Units& units) {
  const double c = units.c;
  const Vec3 v = theta + kE3;
  const double vn = v.norm();
  if (const auto* blobs = std::get_if<BlobSet>(&field)) {
    return pairwise_sum<double>(blobs->blobs.size(), [&](std::size_t i) {
      const auto& b = blobs->blobs[i];
      const double mu = v.dot(b.center);
      const double scale = b.width * vn;
      const double u1 = (c * s1 - mu) / scale;
      const double u2 = (c * s2 - mu) / scale;
      const double gauss = 0.5 * (std::erf(u2 / std::sqrt(2.0)) - std::erf(u1 / std::sqrt(2.0)));
      // int exp(-u^2/2) du = sqrt(2 pi) * gauss
      return b.amplitude * 2.0 * kPi * b.width * b.width * (scale / c) * std::sqrt(2.0 * kPi) * gauss;
    });
  }
  if (const auto* prof = std::get_if<AxialProfile>(&field)) {
    const double gram = plane_gram_factor(theta);
    double acc = 0.0;
    for (const auto& box : prof->boxes) {
      const double a = std::max(s1, box.z_lo * v.z() / c);
      const double b = std::min(s2, box.z_hi * v.z() / c);
      if (b > a) acc += box.amplitude * (b - a);
    }
    return gram * acc;
  }
  // Voxels: composite 5-point Gauss-Legendre in sigma.
  static constexpr std::array<double, 5> x{-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                           0.9061798459386640};
  static constexpr std::array<double, 5> w{0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                           0.4786286704993665, 0.2369268850561891};
  const auto& vox = std::get<ScalarVoxels>(field);
  const auto [lo, hi] = field_sigma_range(field, theta, c);
  const double a = std::max(s1, lo);
  const double b = std::min(s2, hi);
  if (!(b > a)) return 0.0;
  const double h = 0.25 * vox.grid.spacing.minCoeff() * vn / c;
  const auto pieces = static_cast<std::size_t>(std::ceil((b - a) / h));
  const double step = (b - a) / static_cast<double>(pieces);
  return pairwise_sum<double>(pieces, [&](std::size_t p) {
    const double mid = a + step * (static_cast<double>(p) + 0.5);
    double s = 0.0;
    for (std::size_t q = 0; q < x.size(); ++q)
      s += w[q] * plane_integral(field, {mid + 0.5 * step * x[q], theta}, units);
    return 0.5 * step * s;
  });
}

// int_lo^hi b_{N(tau - t)} d tau for piecewise constant b in n.
template <typename F>
double binned_sum(double t, double lo, double hi, double T, const F& plane_value) {
  const long n_lo = plane_index(lo - t, T);
  const long n_hi = plane_index(hi - t, T);
  double acc = 0.0;
  for (long n = n_lo; n <= n_hi; ++n) {
    const double a = std::max(lo, t + (static_cast<double>(n) - 0.5) * T);
    const double b = std::min(hi, t + (static_cast<double>(n) + 0.5) * T);
    if (b > a) acc += (b - a) * plane_value(n);
  }
  return acc;
}

}  // namespace

double plane_gram_factor(const Vec3& theta) { return (theta + kE3).norm() / (1.0 + theta.z()); }

double box_section_area(const Vec3& lo, const Vec3& hi, const PlaneSpec& plane, const Units& units,
                        const Eigen::Vector2d& origin) {
  const Vec3& th = plane.theta;
  const double c = units.c;
  const double gram = plane_gram_factor(th);
  const double rhs = c * plane.sigma;
  if (th.x() == 0.0 && th.y() == 0.0) {
    const double z = rhs / (1.0 + th.z());
    if (z < lo.z() || z >= hi.z()) return 0.0;
    return gram * (hi.x() - lo.x()) * (hi.y() - lo.y());
  }
  // In coordinates u = x - origin the constraint lo3 <= z < hi3 reads
  // rhs - hi3 (1 + th3) < <th12, u + origin> <= rhs - lo3 (1 + th3).
  const Vec2 a(th.x(), th.y());
  const double shift = a.dot(origin);
  std::vector<Vec2> poly{{lo.x() - origin.x(), lo.y() - origin.y()},
                         {hi.x() - origin.x(), lo.y() - origin.y()},
                         {hi.x() - origin.x(), hi.y() - origin.y()},
                         {lo.x() - origin.x(), hi.y() - origin.y()}};
  poly = clip(poly, a, rhs - lo.z() * (1.0 + th.z()) - shift);
  if (poly.size() < 3) return 0.0;
  poly = clip(poly, -a, -(rhs - hi.z() * (1.0 + th.z()) - shift));
  if (poly.size() < 3) return 0.0;
  return gram * shoelace(poly);
}

double plane_integral(const SpatialField& field, const PlaneSpec& plane, const Units& units,
                      const Eigen::Vector2d& origin) {
  const double c = units.c;
  const Vec3 v = plane.theta + kE3;
  if (const auto* blobs = std::get_if<BlobSet>(&field)) {
    return pairwise_sum<double>(blobs->blobs.size(), [&](std::size_t i) {
      const auto& b = blobs->blobs[i];
      const double dist = (c * plane.sigma - v.dot(b.center)) / v.norm();
      return b.amplitude * 2.0 * kPi * b.width * b.width * std::exp(-0.5 * dist * dist / (b.width * b.width));
    });
  }
  if (const auto* prof = std::get_if<AxialProfile>(&field))
    return plane_gram_factor(plane.theta) * prof->value(c * plane.sigma / (1.0 + plane.theta.z()));

  const auto& vox = std::get<ScalarVoxels>(field);
  const Vec3 half = 0.5 * vox.grid.spacing;
  return pairwise_sum<double>(vox.values.size(), [&](std::size_t i) {
    if (vox.values[i] == 0.0) return 0.0;
    const Vec3 ctr = vox.grid.center(i);
    const auto [s_lo, s_hi] = box_sigma_range(ctr - half, ctr + half, v, c);
    if (plane.sigma < s_lo || plane.sigma > s_hi) return 0.0;
    return vox.values[i] * box_section_area(ctr - half, ctr + half, plane, units, origin);
  });
}

Mat3 plane_integral(const AnisotropicMatrix& phantom, std::size_t slice, const PlaneSpec& plane,
                    const Units& units) {
  const auto& values = phantom.slices.at(slice);
  const Vec3 half = 0.5 * phantom.grid.spacing;
  const Vec3 v = plane.theta + kE3;
  return pairwise_sum<Mat3>(values.size(), [&](std::size_t i) -> Mat3 {
    if (values[i].isZero(0.0)) return Mat3::Zero();
    const Vec3 ctr = phantom.grid.center(i);
    const auto [s_lo, s_hi] = box_sigma_range(ctr - half, ctr + half, v, units.c);
    if (plane.sigma < s_lo || plane.sigma > s_hi) return Mat3::Zero();
    return values[i] * box_section_area(ctr - half, ctr + half, plane, units);
  });
}

std::pair<long, long> plane_index_range(const DispersiveScalar& phantom, const Vec3& theta, const Units& units) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : phantom.slices) {
    const auto [a, b] = field_sigma_range(s, theta, units.c);
    lo = std::min(lo, a);
    hi = std::max(hi, b);
  }
  if (!(hi >= lo)) return {0, -1};
  return {plane_index(lo, phantom.bins.T), plane_index(hi, phantom.bins.T)};
}

std::vector<double> trace_from_phantom(const DispersiveScalar& phantom, const Vec3& theta, const TimeGrid& grid,
                                       TraceModel model, const Units& units) {
  if (!(theta.z() > 0.0)) throw InvalidArgument("trace direction needs theta_3 > 0");
  const double kinv = units.c / (theta + kE3).norm();
  const auto& bins = phantom.bins;
  std::vector<double> out(grid.count, 0.0);

  if (model == TraceModel::Continuous) {
    for (std::size_t k = 0; k < grid.count; ++k) {
      const double t = grid.time(k);
      double acc = 0.0;
      for (std::size_t m = 0; m < bins.count; ++m)
        acc += sigma_integral(phantom.slices[m], theta, bins.lo(m) - t, bins.hi(m) - t, units);
      out[k] = kinv * acc;
    }
    return out;
  }

  const auto [n_lo, n_hi] = plane_index_range(phantom, theta, units);
  if (n_hi < n_lo) return out;
  const auto n_planes = static_cast<std::size_t>(n_hi - n_lo + 1);
  std::vector<double> table(n_planes * bins.count);
  for (std::size_t p = 0; p < n_planes; ++p)
    for (std::size_t m = 0; m < bins.count; ++m)
      table[p * bins.count + m] =
          plane_integral(phantom.slices[m], {bins.T * static_cast<double>(n_lo + static_cast<long>(p)), theta}, units);

  for (std::size_t k = 0; k < grid.count; ++k) {
    const double t = grid.time(k);
    double acc = 0.0;
    for (std::size_t m = 0; m < bins.count; ++m) {
      acc += binned_sum(t, bins.lo(m), bins.hi(m), bins.T, [&](long n) {
        if (n < n_lo || n > n_hi) return 0.0;
        return table[static_cast<std::size_t>(n - n_lo) * bins.count + m];
      });
    }
    out[k] = kinv * acc;
  }
  return out;
}

RadonBins radon_bins_from_phantom(const DispersiveScalar& phantom, const std::vector<Vec3>& thetas, long n_min,
                                  long n_max, std::size_t bins_per_T, const Units& units) {
  if (n_max < n_min) throw InvalidArgument("empty plane index window");
  if (bins_per_T == 0) throw InvalidArgument("bins_per_T must be positive");
  RadonBins rb;
  rb.n_min = n_min;
  rb.n_max = n_max;
  rb.bins_per_T = bins_per_T;
  rb.T = phantom.bins.T;
  rb.thetas = thetas;
  rb.values.assign(thetas.size() * rb.n_planes() * bins_per_T, 0.0);
  for (std::size_t th = 0; th < thetas.size(); ++th)
    for (long n = n_min; n <= n_max; ++n)
      for (std::size_t m = 0; m < bins_per_T; ++m) {
        const auto slice = std::min(phantom.bins.count - 1,
                                    static_cast<std::size_t>(std::floor(rb.tau(m) / phantom.bins.width())));
        rb.at(th, n, m) =
            plane_integral(phantom.slices[slice], {rb.T * static_cast<double>(n), thetas[th]}, units);
      }
  return rb;
}

std::vector<double> discrete_forward_trace(const RadonBins& bins, std::size_t theta_index, const TimeGrid& grid,
                                           const Units& units) {
  const Vec3& theta = bins.thetas.at(theta_index);
  const double kinv = units.c / (theta + kE3).norm();
  const double width = bins.T / static_cast<double>(bins.bins_per_T);
  std::vector<double> out(grid.count, 0.0);
  for (std::size_t k = 0; k < grid.count; ++k) {
    const double t = grid.time(k);
    double acc = 0.0;
    for (std::size_t m = 0; m < bins.bins_per_T; ++m) {
      const double lo = width * static_cast<double>(m);
      acc += binned_sum(t, lo, lo + width, bins.T, [&](long n) {
        if (n < bins.n_min || n > bins.n_max) return 0.0;
        return bins.at(theta_index, n, m);
      });
    }
    out[k] = kinv * acc;
  }
  return out;
}

}  // namespace octsim
