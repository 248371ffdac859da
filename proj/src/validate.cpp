#include "octsim/validate.hpp"

#include "octsim/anisotropic.hpp"
#include "octsim/config.hpp"
#include "octsim/forward.hpp"
#include "octsim/inversion.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace octsim {

namespace {

SuiteResult farfield_slope() {
  VoxelGrid grid;
  grid.origin = Vec3(0.0, 0.0, 0.0);
  grid.spacing = Vec3::Constant(0.2);
  grid.dims = {2, 2, 2};
  std::vector<CVec3> phi(grid.size(), CVec3(1.0, 0.0, 0.0));
  const double a = 2.0 * kPi;
  const Vec3 dir = Vec3(0.3, 0.1, 1.0).normalized();
  const double r1 = 200.0;
  const double r2 = 400.0;
  const double e1 = dyadic_green_field(grid, phi, a, r1 * dir).norm();
  const double e2 = dyadic_green_field(grid, phi, a, r2 * dir).norm();
  const double slope = std::log(e2 / e1) / std::log(r2 / r1);
  return {"farfield_decay", std::abs(slope + 1.0) < 0.1, slope, "log-log slope of |E| against distance"};
}

Geometry small_geometry() {
  Geometry g;
  g.d = 100.0;
  g.R = 10.0;
  g.delta = 2.0;
  g.mirrors = {-6.0, 0.5, 32};
  g.directions = direction_grid(3, 3, 0.2);
  g.polarization = kE1;
  return g;
}

SuiteResult measurement_round_trip() {
  const Geometry g = small_geometry();
  const Phantom ph = make_gaussian_phantom({Vec3(0.2, -0.1, 0.0)}, {0.5}, {1.0});
  const Pulse pulse = make_pulse(PulseKind::GaussianCosine, 8.0, 4.0, g);
  const ScatteredSpectrum ref = farfield_spectrum(ph, pulse, g);
  const MeasurementSet m = measurements_from_spectrum(ref, pulse, g);
  const ScatteredSpectrum rec = recover_scattered_spectrum(m);
  double err = 0.0;
  double scale = 0.0;
  for (std::size_t w = 0; w < ref.omegas.size(); ++w) {
    if (!rec.mask[w]) continue;
    for (std::size_t det = 0; det < ref.thetas.size(); ++det) {
      for (int j = 0; j < 2; ++j) {
        if (!rec.components[static_cast<std::size_t>(j)]) continue;
        const cplx a = ref.at(w, det)(j);
        const cplx b = rec.at(w, det)(j);
        err = std::max(err, std::abs(a - b));
        scale = std::max(scale, std::abs(a));
      }
    }
  }
  const double rel = scale > 0.0 ? err / scale : 1.0;
  return {"measurement_round_trip", rel < 1e-8, rel, "relative error of the recovered scattered spectrum"};
}

SuiteResult fresnel_identities(const ValidationHooks& hooks, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> chi(-0.5, 3.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const double c1 = chi(rng);
    const double c2 = chi(rng);
    const FresnelCoefficients f = hooks.fresnel(c1, c2);
    const double n1 = std::sqrt(1.0 + c1);
    const double n2 = std::sqrt(1.0 + c2);
    worst = std::max(worst, std::abs(f.tau - 1.0 - f.rho));
    worst = std::max(worst, std::abs(f.rho * f.rho + (n2 / n1) * f.tau * f.tau - 1.0));
  }
  // vacuum over chi = 3: n = 2, reflection -1/3
  const FresnelCoefficients f = hooks.fresnel(0.0, 3.0);
  worst = std::max(worst, std::abs(f.rho + 1.0 / 3.0));
  return {"fresnel_identities", worst < 1e-12, worst, "max deviation of tau = 1 + rho, energy balance, rho(0, 3)"};
}

SuiteResult transfer_determinant(const ValidationHooks& hooks, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> chi(0.0, 2.0);
  std::uniform_real_distribution<double> w(0.5, 20.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const double c1 = chi(rng);
    const double c2 = chi(rng);
    const FresnelCoefficients f = hooks.fresnel(c1, c2);
    const CMat2 M = transfer_matrix(c2, 1.0, 0.3, w(rng), f.rho, f.tau);
    const double expected = std::sqrt((1.0 + c2) / (1.0 + c1));
    worst = std::max(worst, std::abs(M.determinant() - expected));
  }
  return {"transfer_determinant", worst < 1e-12, worst, "max |det M - n_next / n_prev|"};
}

SuiteResult incident_round_trip(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> chi(0.0, 1.5);
  std::vector<StackLayer> prefix;
  double top = 3.0;
  for (int k = 0; k < 4; ++k) {
    const double bottom = top - 0.5 - 0.1 * k;
    prefix.push_back({top, bottom, chi(rng)});
    top = bottom;
  }
  double worst = 0.0;
  for (double omega : {1.0, 4.0, 11.0}) {
    const cplx E0(1.0, 0.25);
    const ConsistentIncident ci = incident_without_backward(prefix, E0, omega);
    const IncidentField back = propagate_incident(prefix, E0, ci.reflected, omega);
    worst = std::max(worst, std::abs(back.field - ci.field) / std::abs(ci.field));
    worst = std::max(worst, std::abs(back.residual) / std::abs(ci.field));
  }
  return {"incident_round_trip", worst < 1e-10, worst, "relative mismatch of the propagated incident field"};
}

SuiteResult anisotropic_algebra(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  const std::vector<Mat3> rots{axis_angle_rotation(Vec3(1.0, 0.2, 0.0), 0.35),
                               axis_angle_rotation(Vec3(0.1, 1.0, 0.3), -0.4),
                               axis_angle_rotation(Vec3(0.7, -0.6, 0.2), 0.5)};
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Mat3 X;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) X(i, j) = g(rng);
    const Vec3 theta = Vec3(0.1 * g(rng), 0.1 * g(rng), 1.0).normalized();
    std::vector<Mat2> blocks;
    for (const auto& R : rots) blocks.push_back(rotated_block(X, R, theta));
    const AnisotropicSolution sol = anisotropic_solve(theta, rots, blocks);
    worst = std::max(worst, (sol.X - X).norm() / X.norm());
  }
  return {"anisotropic_recovery", worst < 1e-8, worst, "relative error of X from three rotated blocks"};
}

SuiteResult recursion_exactness() {
  DispersiveScalar ph;
  ph.bins = {1.0, 8};
  for (std::size_t m = 0; m < ph.bins.count; ++m) {
    const double s = std::exp(-0.3 * static_cast<double>(m));
    ph.slices.push_back(BlobSet{{GaussianBlob{Vec3(0.1, 0.0, 1.5), 0.4, s}}});
  }
  const std::vector<Vec3> thetas{kE3, Vec3(0.1, 0.05, 1.0).normalized()};
  long n_lo = 0;
  long n_hi = 0;
  for (const auto& th : thetas) {
    const auto r = plane_index_range(ph, th);
    n_lo = std::min(n_lo, r.first);
    n_hi = std::max(n_hi, r.second);
  }
  const RadonBins ref = radon_bins_from_phantom(ph, thetas, 0, n_hi, 8);
  TraceSet traces;
  traces.thetas = thetas;
  const double T = ph.bins.T;
  traces.grid.dt = T / 64.0;
  traces.grid.t0 = -(static_cast<double>(n_hi) + 1.0) * T;
  traces.grid.count = static_cast<std::size_t>((static_cast<double>(n_hi) + 2.0) * 64.0) + 1;
  for (std::size_t i = 0; i < thetas.size(); ++i) traces.values.push_back(discrete_forward_trace(ref, i, traces.grid));
  const RadonBins rec = dispersive_recursion(traces, T, n_hi, 0, 8);
  double err = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < ref.values.size(); ++i) {
    err = std::max(err, std::abs(ref.values[i] - rec.values[i]));
    scale = std::max(scale, std::abs(ref.values[i]));
  }
  const double rel = scale > 0.0 ? err / scale : 1.0;
  return {"recursion_exactness", rel < 1e-8, rel, "relative error of plane data recovered from exact traces"};
}

}  // namespace

std::vector<SuiteResult> run_validation(const ValidationHooks& hooks, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<SuiteResult> out;
  auto guarded = [&](const std::string& name, const std::function<SuiteResult()>& f) {
    try {
      out.push_back(f());
    } catch (const std::exception& e) {
      out.push_back({name, false, std::nan(""), std::string("threw: ") + e.what()});
    }
  };
  guarded("farfield_decay", farfield_slope);
  guarded("measurement_round_trip", measurement_round_trip);
  guarded("fresnel_identities", [&] { return fresnel_identities(hooks, rng); });
  guarded("transfer_determinant", [&] { return transfer_determinant(hooks, rng); });
  guarded("incident_round_trip", [&] { return incident_round_trip(rng); });
  guarded("anisotropic_recovery", [&] { return anisotropic_algebra(rng); });
  guarded("recursion_exactness", recursion_exactness);
  return out;
}

}  // namespace octsim
