#include "octsim/layered.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace octsim;

namespace {

TraceSet layered_traces(const Layered& ph, bool attenuation, double omega0, double dt_fraction = 16.0) {
  const double T = ph.bins.T;
  const long top = static_cast<long>(std::ceil(2.0 * ph.boundaries.front() / T)) + 2;
  TraceSet t;
  t.thetas = {kE3};
  t.grid.dt = T / dt_fraction;
  t.grid.t0 = -(static_cast<double>(top) + 0.5) * T;
  t.grid.count = static_cast<std::size_t>(std::llround((static_cast<double>(top) + 1.0) * dt_fraction)) + 1;
  t.values.push_back(layered_forward_trace(ph, t.grid, attenuation, omega0));
  return t;
}

/// Transfer matrix written out from the amplitude relations.
CMat2 transfer_oracle(double n_layer, double thickness, double omega, double rho) {
  const cplx e = std::polar(1.0, omega * n_layer * thickness);
  CMat2 M;
  M << e, rho / e, rho * e, 1.0 / e;
  return M / (1.0 + rho);
}

}  // namespace

TEST_CASE("Fresnel coefficients", "[layered]") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.9, 4.0);
  for (int t = 0; t < 200; ++t) {
    const double a = u(rng);
    const double b = u(rng);
    const FresnelCoefficients f = fresnel(a, b);
    const FresnelCoefficients g = fresnel(b, a);
    const double n1 = std::sqrt(1.0 + a);
    const double n2 = std::sqrt(1.0 + b);
    CHECK(std::abs(f.rho - oracle::fresnel_rho(n1, n2)) < 1e-15);
    CHECK(std::abs(f.rho + g.rho) < 1e-12);
    CHECK(std::abs(f.tau - 1.0 - f.rho) < 1e-12);
    CHECK(std::abs(f.rho * f.rho + (n2 / n1) * f.tau * f.tau - 1.0) < 1e-12);
  }
  CHECK(fresnel(0.0, 0.0).rho == 0.0);
  CHECK_THROWS_AS(fresnel(-1.0, 0.5), InvalidArgument);
}

TEST_CASE("transfer matrix and its determinant", "[layered]") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    const double a = u(rng);
    const double b = u(rng);
    const FresnelCoefficients f = fresnel(a, b);
    const double w = 0.5 + 5.0 * u(rng);
    const CMat2 M = transfer_matrix(b, 2.0, 1.3, w, f.rho, f.tau, Units{1.0});
    CHECK((M - transfer_oracle(std::sqrt(1.0 + b), 0.7, w, f.rho)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(M.determinant() - (1.0 - f.rho) / (1.0 + f.rho)) < 1e-12);
  }
  CHECK_THROWS_AS(transfer_matrix(0.0, 1.0, 0.0, 1.0, -1.0, 0.0), SingularMatrixError);
}

TEST_CASE("stack product multiplies layer matrices", "[layered]") {
  const std::vector<StackLayer> layers{{3.0, 2.0, 0.4}, {2.0, 1.2, 1.1}, {1.2, 0.0, 0.2}};
  const double w = 2.3;
  CMat2 ref = CMat2::Identity();
  double prev = 0.0;
  for (const auto& l : layers) {
    const double rho = oracle::fresnel_rho(std::sqrt(1.0 + prev), std::sqrt(1.0 + l.chi));
    ref = ref * transfer_oracle(std::sqrt(1.0 + l.chi), l.top - l.bottom, w, rho);
    prev = l.chi;
  }
  CHECK((stack_product(layers, w) - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("incident field propagation round trip", "[layered]") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<StackLayer> prefix;
    double top = 4.0;
    for (int k = 0; k < 3; ++k) {
      const double bottom = top - 0.3 - 0.4 * u(rng);
      prefix.push_back({top, bottom, u(rng)});
      top = bottom;
    }
    const double w = 0.5 + 4.0 * u(rng);
    const cplx E0(1.0, 0.5 * u(rng));
    const ConsistentIncident ci = incident_without_backward(prefix, E0, w);
    // Forward: (E0, E1r) = M (E_n, 0).
    const CMat2 M = stack_product(prefix, w);
    CHECK(std::abs(M(0, 0) * ci.field - E0) < 1e-12);
    CHECK(std::abs(M(1, 0) * ci.field - ci.reflected) < 1e-12);
    const IncidentField back = propagate_incident(prefix, E0, ci.reflected, w);
    CHECK(std::abs(back.field - ci.field) < 1e-12);
    CHECK(std::abs(back.residual) < 1e-12);
  }
  // Vacuum prefix transmits unchanged.
  CHECK(std::abs(propagate_incident({}, cplx(2.0), cplx(0.0), 1.0).field - 2.0) < 1e-15);
}

TEST_CASE("single layer reconstruction", "[layered]") {
  Layered ph;
  ph.boundaries = {2.0, 1.0, 0.0};
  ph.bins = {0.2, 4};
  const double chi1 = 0.3;
  ph.profiles = {{chi1, chi1, chi1, chi1}, {0.0, 0.0, 0.0, 0.0}};
  const TraceSet t = layered_traces(ph, false, 0.0);
  LayeredOptions opt;
  opt.bins_per_T = 4;
  opt.incident_update = false;
  const LayerStack st = layered_reconstruct(t, Pulse{}, ph.bins.T, opt);
  REQUIRE(st.boundaries.size() == 3);
  const double sample = t.units.c * ph.bins.T / 2.0;
  CHECK(std::abs(st.boundaries[0] - 2.0) <= sample);
  CHECK(std::abs(st.boundaries[1] - 1.0) <= sample);
  for (double v : st.profiles[0]) CHECK(v == Catch::Approx(chi1).epsilon(1e-10));
  CHECK(st.static_chi[0] == Catch::Approx(chi1 * ph.bins.T).epsilon(1e-10));
  CHECK(std::abs(st.static_chi[1]) < 1e-10);
}

TEST_CASE("incident update undoes the Fresnel attenuation", "[layered]") {
  Layered ph;
  ph.boundaries = {3.0, 2.0, 1.0, 0.0};
  ph.bins = {0.25, 4};
  ph.profiles = {{0.4, 0.3, 0.2, 0.1}, {1.2, 1.0, 0.8, 0.6}, {0.2, 0.2, 0.1, 0.1}};
  const double omega0 = 6.0;
  const TraceSet t = layered_traces(ph, true, omega0);
  LayeredOptions opt;
  opt.bins_per_T = 4;
  opt.omega0 = omega0;
  const LayerStack st = layered_reconstruct(t, Pulse{}, ph.bins.T, opt);
  REQUIRE(st.profiles.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t m = 0; m < 4; ++m) CHECK(st.profiles[k][m] == Catch::Approx(ph.profiles[k][m]).epsilon(1e-9));
    CHECK(std::abs(st.boundaries[k] - ph.boundaries[k]) <= ph.bins.T / 2.0);
  }
  CHECK(st.attenuation[0] == 1.0);
  CHECK(st.attenuation[1] < 1.0);

  // Without the update the deeper layers come out attenuated.
  opt.incident_update = false;
  const LayerStack raw = layered_reconstruct(t, Pulse{}, ph.bins.T, opt);
  CHECK(raw.profiles[1][0] < 0.999 * ph.profiles[1][0]);
}

TEST_CASE("layered reconstruction edge cases", "[layered]") {
  Layered ph;
  ph.boundaries = {2.0, 0.0};
  ph.bins = {0.2, 2};
  ph.profiles = {{0.5, 0.5}};
  TraceSet t = layered_traces(ph, false, 0.0);
  LayeredOptions opt;
  opt.bins_per_T = 2;
  opt.incident_update = false;

  TraceSet zero = t;
  std::fill(zero.values[0].begin(), zero.values[0].end(), 0.0);
  CHECK(layered_reconstruct(zero, Pulse{}, 0.2, opt).boundaries.empty());

  LayeredOptions strict = opt;
  strict.floor = 2.0;  // no jump can exceed twice the largest one
  try {
    layered_reconstruct(t, Pulse{}, 0.2, strict);
    FAIL("expected DetectionFailure");
  } catch (const DetectionFailure& e) {
    CHECK_FALSE(e.diagnostic().empty());
  }

  TraceSet off_axis = t;
  off_axis.thetas = {Vec3(0.6, 0.0, 0.8)};
  CHECK_THROWS_AS(layered_reconstruct(off_axis, Pulse{}, 0.2, opt), ModeMismatchError);
}
