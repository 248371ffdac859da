#include "octsim/forward.hpp"
#include "octsim/inversion.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace octsim;

namespace {

Geometry small_geometry(std::size_t mirrors = 32) {
  Geometry g;
  g.d = 100.0;
  g.R = 10.0;
  g.delta = 2.0;
  g.mirrors = {-6.0, 15.5 / static_cast<double>(mirrors), mirrors};
  g.directions = direction_grid(3, 3, 0.2);
  g.polarization = Vec3(1.0, 0.5, 0.0);
  return g;
}

}  // namespace

TEST_CASE("incident spectrum and mirror field", "[forward]") {
  Geometry g = small_geometry();
  const Pulse p = make_pulse(PulseKind::GaussianCosine, 8.0, 4.0, g);
  const Vec3 x(0.1, 0.2, 3.0);
  const CVec3 e = incident_spectrum(p, 5.0, x, kE1);
  CHECK(std::abs(e(0) - p.spectrum(5.0) * std::polar(1.0, -5.0 * 3.0)) < 1e-14);
  CHECK(std::abs(e(1)) == 0.0);
  // At the mirror surface the incident and reflected fields cancel.
  CHECK(mirror_field(p, 3.0, 8.0, Vec3(0.0, 0.0, 3.0 + 1e-12), kE1).norm() < 1e-9);
  CHECK(mirror_field(p, 3.0, 8.0, Vec3(0.0, 0.0, 2.0), kE1).norm() == 0.0);
}

TEST_CASE("Born far field of a blob matches the closed form", "[forward]") {
  const Vec3 ctr(0.2, -0.1, 0.3);
  const Phantom ph = make_gaussian_phantom({ctr}, {0.4}, {0.7});
  const Units u{1.5};
  const Vec3 theta = Vec3(0.1, -0.2, 1.0).normalized();
  const Vec3 p(1.0, 0.5, 0.0);
  const double rho = 80.0;
  const cplx fhat(0.3, -0.2);
  for (double w : {-4.0, 2.0, 7.5}) {
    const Vec3 k = (w / u.c) * (theta + kE3);
    const cplx chi = oracle::gaussian_transform(k, ctr, 0.4, 0.7);
    const CVec3 cp = chi * p.cast<cplx>();
    const CVec3 th = theta.cast<cplx>();
    const CVec3 cross = th.cross(th.cross(cp));
    const cplx pref = -(w * w) * std::polar(1.0, w * rho / u.c) / (4.0 * oracle::pi * rho * u.c * u.c) * fhat;
    const CVec3 ref = pref * cross;
    const CVec3 lib = born_farfield(ph, fhat, w, theta, rho, p, u);
    CHECK((lib - ref).norm() < 1e-13 * ref.norm());
    // Transversality: theta . E = 0.
    CHECK(std::abs(theta.cast<cplx>().dot(lib)) < 1e-13 * lib.norm());
  }
  CHECK_THROWS_AS(born_farfield(ph, fhat, 0.0, theta, rho, p, u), InvalidArgument);
}

TEST_CASE("dyadic Green field matches finite differences", "[forward]") {
  VoxelGrid grid;
  grid.origin = Vec3(0.0, 0.0, 0.0);
  grid.spacing = Vec3::Constant(0.25);
  grid.dims = {2, 1, 2};
  std::vector<CVec3> phi{CVec3(1.0, 0.0, 0.5), CVec3(0.0, cplx(0.0, 1.0), 0.0), CVec3(0.3, 0.3, 0.3),
                         CVec3(-1.0, 0.2, 0.0)};
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < grid.size(); ++i) pts.push_back(grid.center(i));
  const double a = 3.0;
  const Vec3 x(1.2, -0.7, 2.1);
  const CVec3 lib = dyadic_green_field(grid, phi, a, x);
  const CVec3 ref = oracle::dyadic_field_fd(pts, phi, 0.25 * 0.25 * 0.25, a, x, 1e-4);
  CHECK((lib - ref).norm() < 1e-5 * ref.norm());
  CHECK_THROWS_AS(dyadic_green_field(grid, phi, a, Vec3(0.3, 0.0, 0.1)), InvalidArgument);
}

TEST_CASE("dyadic far field relative error shrinks like 1/rho", "[forward][property]") {
  VoxelGrid grid;
  grid.origin = Vec3(-0.1, -0.1, 0.0);
  grid.spacing = Vec3::Constant(0.2);
  grid.dims = {2, 2, 2};
  std::vector<CVec3> phi(grid.size(), CVec3(1.0, 0.2, 0.0));
  const double a = 2.0 * oracle::pi;
  const Vec3 theta = Vec3(0.2, 0.1, 1.0).normalized();
  auto err = [&](double rho) {
    const CVec3 exact = dyadic_green_field(grid, phi, a, rho * theta);
    return (dyadic_farfield(grid, phi, a, theta, rho) - exact).norm() / exact.norm();
  };
  const double s = std::log(err(400.0) / err(100.0)) / std::log(4.0);
  CHECK(std::abs(s + 1.0) < 0.1);
}

TEST_CASE("measurements match the discrete synthesis sum", "[forward]") {
  const Geometry g = small_geometry(16);
  const Pulse pulse = make_pulse(PulseKind::GaussianCosine, 8.0, 4.0, g);
  const Phantom ph = make_gaussian_phantom({Vec3(0.1, 0.0, 0.2)}, {0.5}, {1.0});
  const ScatteredSpectrum s = farfield_spectrum(ph, pulse, g);
  const MeasurementSet m = measurements_from_spectrum(s, pulse, g);
  const double dw = oracle::pi * g.units.c / (static_cast<double>(g.mirrors.count) * g.mirrors.dr);
  double worst = 0.0;
  for (std::size_t r = 0; r < g.mirrors.count; ++r)
    for (std::size_t det = 0; det < g.directions.size(); ++det)
      for (int j = 0; j < 2; ++j) {
        cplx acc = 0.0;
        for (std::size_t w = 0; w < s.omegas.size(); ++w) {
          const double om = s.omegas[w];
          acc += s.at(w, det)(j) * std::conj(pulse.spectrum(om)) *
                 std::polar(1.0, om * (2.0 * g.mirrors.position(r) - g.d) / g.units.c);
        }
        const double ref = (-g.polarization(j) / (2.0 * oracle::pi) * dw * acc).real();
        worst = std::max(worst, std::abs(ref - m.at(r, det, static_cast<std::size_t>(j))));
      }
  CHECK(worst < 1e-12 * m.max_abs());
  CHECK(m.raw_imag_max < 1e-10 * m.max_abs());
}

TEST_CASE("measurements are linear in the phantom", "[forward][property]") {
  const Geometry g = small_geometry(16);
  const Pulse pulse = make_pulse(PulseKind::GaussianCosine, 8.0, 4.0, g);
  const Phantom a = make_gaussian_phantom({Vec3(0.1, 0.0, 0.2)}, {0.5}, {1.0});
  const Phantom b = make_gaussian_phantom({Vec3(-0.3, 0.2, -0.4)}, {0.3}, {-0.6});
  const Phantom ab = make_gaussian_phantom({Vec3(0.1, 0.0, 0.2), Vec3(-0.3, 0.2, -0.4)}, {0.5, 0.3}, {2.0, -1.2});
  const MeasurementSet ma = synthesize_measurements(a, pulse, g);
  const MeasurementSet mb = synthesize_measurements(b, pulse, g);
  const MeasurementSet mab = synthesize_measurements(ab, pulse, g);
  double worst = 0.0;
  for (std::size_t i = 0; i < ma.values.size(); ++i)
    worst = std::max(worst, std::abs(2.0 * ma.values[i] + 2.0 * mb.values[i] - mab.values[i]));
  CHECK(worst < 1e-12 * mab.max_abs());
  const MeasurementSet ms = synthesize_measurements(scaled(a, -3.0), pulse, g);
  for (std::size_t i = 0; i < ma.values.size(); ++i) CHECK(std::abs(ms.values[i] + 3.0 * ma.values[i]) < 1e-12 * ms.max_abs());
}

TEST_CASE("recovery inverts synthesis", "[forward][inversion]") {
  const Geometry g = small_geometry(32);
  const Pulse pulse = make_pulse(PulseKind::GaussianCosine, 8.0, 4.0, g);
  const Phantom ph = make_gaussian_phantom({Vec3(0.1, 0.0, 0.2), Vec3(-0.4, 0.3, -0.5)}, {0.5, 0.3}, {1.0, 0.4});
  const ScatteredSpectrum ref = farfield_spectrum(ph, pulse, g);
  const ScatteredSpectrum rec = recover_scattered_spectrum(synthesize_measurements(ph, pulse, g));
  CHECK(rec.components[0]);
  CHECK(rec.components[1]);
  CHECK_FALSE(rec.components[2]);
  double err = 0.0;
  double scale = 0.0;
  std::size_t used = 0;
  for (std::size_t w = 0; w < ref.n_omega(); ++w) {
    if (!rec.mask[w]) {
      CHECK(std::isnan(rec.at(w, 0)(0).real()));
      continue;
    }
    ++used;
    for (std::size_t det = 0; det < ref.n_det(); ++det)
      for (int j = 0; j < 2; ++j) {
        err = std::max(err, std::abs(rec.at(w, det)(j) - ref.at(w, det)(j)));
        scale = std::max(scale, std::abs(ref.at(w, det)(j)));
      }
  }
  CHECK(used > 0);
  CHECK(err < 1e-8 * scale);
}

TEST_CASE("recovery honours the polarization", "[forward][inversion]") {
  Geometry g = small_geometry(16);
  g.polarization = kE1;
  const Pulse pulse = make_pulse(PulseKind::GaussianCosine, 8.0, 4.0, g);
  const Phantom ph = make_gaussian_phantom({Vec3(0.1, 0.0, 0.2)}, {0.5}, {1.0});
  const MeasurementSet m = synthesize_measurements(ph, pulse, g);
  const ScatteredSpectrum rec = recover_scattered_spectrum(m);
  CHECK(rec.components[0]);
  CHECK_FALSE(rec.components[1]);
  CHECK_THROWS_AS(recover_scattered_spectrum(m, 1e-3, std::array<bool, 2>{true, true}), InvalidArgument);
  // A threshold above every spectral value masks the whole band.
  CHECK_THROWS_AS(recover_scattered_spectrum(m, 2.0), DegenerateDataError);
}

TEST_CASE("farfield spectrum is thread-count independent", "[forward][determinism]") {
  const Geometry g = small_geometry(16);
  const Pulse pulse = make_pulse(PulseKind::GaussianCosine, 8.0, 4.0, g);
  const Phantom ph = make_gaussian_phantom({Vec3(0.1, 0.0, 0.2)}, {0.5}, {1.0});
  const MeasurementSet m1 = synthesize_measurements(ph, pulse, g, 1);
  const MeasurementSet m3 = synthesize_measurements(ph, pulse, g, 3);
  CHECK(m1.values == m3.values);
}
