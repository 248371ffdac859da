#include "octsim/forward.hpp"

#include "octsim/numeric.hpp"

#include <cmath>
#include <limits>

namespace octsim {

namespace {

// theta x (theta x q) = theta <theta, q> - q
CVec3 double_cross(const Vec3& theta, const CVec3& q) {
  const CVec3 th = theta.cast<cplx>();
  return th * (th.transpose() * q)(0) - q;
}

}  // namespace

double MeasurementSet::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

CVec3 incident_spectrum(const Pulse& pulse, double omega, const Vec3& x, const Vec3& p, const Units& units) {
  const cplx phase = std::exp(-kI * (omega * x.z() / units.c));
  return (pulse.spectrum(omega) * phase) * p.cast<cplx>();
}

Vec3 mirror_field(const Pulse& pulse, double r, double t, const Vec3& x, const Vec3& p, const Units& units) {
  if (x.z() <= r) return Vec3::Zero();
  const double c = units.c;
  const double a = pulse.value(t + x.z() / c);
  const double b = pulse.value(t + x.z() / c + 2.0 * (r - x.z()) / c);
  return (a - b) * p;
}

CVec3 born_farfield(const Phantom& phantom, cplx pulse_hat, double omega, const Vec3& theta, double rho,
                    const Vec3& p, const Units& units) {
  if (omega == 0.0) throw InvalidArgument("Born far field is undefined at omega = 0");
  if (!(theta.z() > 0.0)) throw InvalidArgument("detector direction needs theta_3 > 0");
  if (!(rho > 0.0)) throw InvalidArgument("detector distance must be positive");
  const double c = units.c;
  const Vec3 k = (omega / c) * (theta + kE3);
  const CVec3 q = chi_tilde_matrix(phantom, omega, k) * p.cast<cplx>();
  const cplx pref = -(omega * omega * std::exp(kI * (omega * rho / c)) / (4.0 * kPi * rho * c * c)) * pulse_hat;
  return pref * double_cross(theta, q);
}

CVec3 born_farfield(const Phantom& phantom, const Pulse& pulse, double omega, const Vec3& theta, double rho,
                    const Vec3& p, const Units& units) {
  return born_farfield(phantom, pulse.spectrum(omega), omega, theta, rho, p, units);
}

CVec3 dyadic_green_field(const VoxelGrid& grid, const std::vector<CVec3>& phi, double a, const Vec3& x) {
  if (phi.size() != grid.size()) throw InvalidArgument("field sample count does not match grid");
  for (std::size_t i = 0; i < phi.size(); ++i) {
    if (phi[i].isZero(0.0)) continue;
    const Vec3 off = (x - grid.center(i)).cwiseAbs();
    if ((off.array() <= grid.spacing.array()).all())
      throw InvalidArgument("evaluation point lies within one voxel of the field support");
  }
  const double vol = grid.voxel_volume();
  const CVec3 acc = pairwise_sum<CVec3>(phi.size(), [&](std::size_t i) -> CVec3 {
    if (phi[i].isZero(0.0)) return CVec3::Zero();
    const Vec3 z = x - grid.center(i);
    const double r = z.norm();
    const cplx e = std::exp(kI * (a * r));
    const cplx g = e / r;
    // radial derivatives of exp(i a r)/r
    const cplx g1 = e * (kI * a / r - 1.0 / (r * r));
    const cplx g2 = e * (-a * a / r - 2.0 * kI * a / (r * r) + 2.0 / (r * r * r));
    const Vec3 u = z / r;
    const Mat3 uu = u * u.transpose();
    const CMat3 kernel = (a * a) * g * CMat3::Identity() + g2 * uu.cast<cplx>() +
                         (g1 / r) * (Mat3::Identity() - uu).cast<cplx>();
    return kernel * phi[i];
  });
  return vol * acc;
}

CVec3 dyadic_farfield(const VoxelGrid& grid, const std::vector<CVec3>& phi, double a, const Vec3& theta,
                      double rho) {
  if (phi.size() != grid.size()) throw InvalidArgument("field sample count does not match grid");
  const double vol = grid.voxel_volume();
  const CVec3 acc = pairwise_sum<CVec3>(phi.size(), [&](std::size_t i) -> CVec3 {
    if (phi[i].isZero(0.0)) return CVec3::Zero();
    return double_cross(theta, phi[i]) * std::exp(-kI * (a * theta.dot(grid.center(i))));
  });
  return -(a * a * std::exp(kI * (a * rho)) / rho) * vol * acc;
}

ScatteredSpectrum farfield_spectrum(const Phantom& phantom, const Pulse& pulse, const Geometry& geometry,
                                    unsigned threads) {
  geometry.validate();
  validate_phantom(phantom, geometry.units);
  geometry.validate_phantom(phantom);
  const auto grid = FrequencyGrid::from_mirrors(geometry.mirrors, geometry.units);

  ScatteredSpectrum s;
  s.omegas = grid.values();
  s.thetas = geometry.directions;
  for (std::size_t det = 0; det < s.thetas.size(); ++det) s.rhos.push_back(geometry.detector_distance(det));
  s.pulse_spectrum.resize(grid.size());
  for (std::size_t w = 0; w < grid.size(); ++w) s.pulse_spectrum[w] = pulse.spectrum(grid[w]);
  s.values.assign(grid.size() * s.thetas.size(), CVec3::Zero());
  s.mask.assign(grid.size(), 1);

  parallel_for(s.thetas.size(), threads, [&](std::size_t det) {
    for (std::size_t w = 0; w < grid.size(); ++w)
      s.at(w, det) = born_farfield(phantom, s.pulse_spectrum[w], grid[w], s.thetas[det], s.rhos[det],
                                   geometry.polarization, geometry.units);
  });
  return s;
}

MeasurementSet measurements_from_spectrum(const ScatteredSpectrum& spectrum, const Pulse& pulse,
                                          const Geometry& geometry, unsigned threads) {
  geometry.validate();
  const auto grid = FrequencyGrid::from_mirrors(geometry.mirrors, geometry.units);
  if (spectrum.omegas != grid.values() || spectrum.thetas.size() != geometry.directions.size())
    throw ConfigurationError("spectrum frequency grid does not match the mirror grid");

  MeasurementSet ms{geometry, pulse, {}, 0.0};
  const std::size_t nr = geometry.mirrors.count;
  const std::size_t nd = geometry.directions.size();
  const std::size_t nw = grid.size();
  ms.values.assign(nr * nd * 2, 0.0);
  std::vector<double> imag_max(nd, 0.0);
  const double c = geometry.units.c;
  const double dw = grid.step();

  parallel_for(nd, threads, [&](std::size_t det) {
    const double x3 = geometry.d;
    for (std::size_t j = 0; j < 2; ++j) {
      const double pj = geometry.polarization[static_cast<Eigen::Index>(j)];
      if (pj == 0.0) continue;
      std::vector<cplx> g(nw);
      for (std::size_t w = 0; w < nw; ++w)
        g[w] = spectrum.at(w, det)[static_cast<Eigen::Index>(j)] * std::conj(spectrum.pulse_spectrum[w]);
      std::vector<cplx> gs(nw);
      for (std::size_t w = 0; w < nw; ++w) gs[w] = 0.5 * (g[w] + std::conj(g[grid.conjugate(w)]));
      for (std::size_t r = 0; r < nr; ++r) {
        const double rr = geometry.mirrors.position(r);
        auto term = [&](const std::vector<cplx>& v) {
          return pairwise_sum<cplx>(nw, [&](std::size_t w) {
            return v[w] * std::exp(kI * (grid[w] * (2.0 * rr - x3) / c));
          });
        };
        const double scale = -pj / (2.0 * kPi) * dw;
        const cplx raw = scale * term(g);
        imag_max[det] = std::max(imag_max[det], std::abs(raw.imag()));
        ms.at(r, det, j) = (scale * term(gs)).real();
      }
    }
  });
  for (double v : imag_max) ms.raw_imag_max = std::max(ms.raw_imag_max, v);
  return ms;
}

MeasurementSet synthesize_measurements(const Phantom& phantom, const Pulse& pulse, const Geometry& geometry,
                                       unsigned threads) {
  return measurements_from_spectrum(farfield_spectrum(phantom, pulse, geometry, threads), pulse, geometry,
                                    threads);
}

}  // namespace octsim
