#include "octsim/radon.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace octsim;

namespace {

DispersiveScalar blob_phantom() {
  DispersiveScalar d;
  d.bins = {1.0, 4};
  const double amps[4] = {1.0, 0.6, -0.3, 0.2};
  for (double a : amps)
    d.slices.push_back(BlobSet{{GaussianBlob{Vec3(0.2, -0.1, 1.0), 0.35, a}, GaussianBlob{Vec3(-0.3, 0.2, 0.4), 0.25, 0.5 * a}}});
  return d;
}

}  // namespace

TEST_CASE("box section area matches the corner-sum formula", "[radon]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Units units{1.3};
  for (int t = 0; t < 200; ++t) {
    const Vec3 lo(u(rng), u(rng), u(rng));
    const Vec3 hi = lo + Vec3(0.2 + 0.5 * std::abs(u(rng)), 0.2 + 0.5 * std::abs(u(rng)), 0.2 + 0.5 * std::abs(u(rng)));
    const Vec3 theta = Vec3(0.4 * u(rng), 0.4 * u(rng), 1.0).normalized();
    const Vec3 n = theta + kE3;
    const Vec3 mid = 0.5 * (lo + hi);
    const double s = (n.dot(mid) + 0.4 * u(rng)) / units.c;
    const double lib = box_section_area(lo, hi, {s, theta}, units);
    const double ref = oracle::box_plane_area(lo, hi, n, units.c * s);
    CHECK(std::abs(lib - ref) < 1e-11);
  }
}

TEST_CASE("box section area uses half-open faces along the axis", "[radon]") {
  const Vec3 lo(0.0, 0.0, 1.0);
  const Vec3 hi(1.0, 2.0, 1.5);
  // theta = e3: the plane is x3 = c sigma / 2.
  CHECK(box_section_area(lo, hi, {2.0, kE3}) == Catch::Approx(2.0));
  CHECK(box_section_area(lo, hi, {3.0, kE3}) == 0.0);
  CHECK(box_section_area(lo, hi, {1.0, kE3}) == 0.0);
}

TEST_CASE("plane integral of a blob matches 2D quadrature", "[radon]") {
  const BlobSet b{{GaussianBlob{Vec3(0.2, -0.1, 0.5), 0.3, 1.4}}};
  const Vec3 theta = Vec3(0.25, -0.15, 1.0).normalized();
  const Units units{1.0};
  const double gram = (theta + kE3).norm() / (1.0 + theta.z());
  for (double sigma : {0.3, 1.0, 1.6}) {
    // Graph parametrisation over (x1, x2), trapezoid on a wide square.
    const int n = 200;
    const double L = 3.0;
    const double h = 2.0 * L / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j) {
        const double x1 = -L + h * i;
        const double x2 = -L + h * j;
        const double x3 = (units.c * sigma - theta.x() * x1 - theta.y() * x2) / (1.0 + theta.z());
        const Vec3 d = Vec3(x1, x2, x3) - Vec3(0.2, -0.1, 0.5);
        const double wt = ((i == 0 || i == n) ? 0.5 : 1.0) * ((j == 0 || j == n) ? 0.5 : 1.0);
        acc += wt * 1.4 * std::exp(-0.5 * d.squaredNorm() / 0.09);
      }
    acc *= h * h * gram;
    CHECK(std::abs(plane_integral(b, {sigma, theta}, units) - acc) < 1e-10);
  }
}

TEST_CASE("voxel plane integral equals the sum of voxel sections", "[radon]") {
  ScalarVoxels v;
  v.grid.origin = Vec3(-0.3, -0.3, 0.2);
  v.grid.spacing = Vec3(0.2, 0.2, 0.25);
  v.grid.dims = {4, 4, 3};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < v.grid.size(); ++i) v.values.push_back(u(rng));
  const Vec3 theta = Vec3(0.2, 0.1, 1.0).normalized();
  const Vec3 n = theta + kE3;
  const double s = n.dot(Vec3(0.0, 0.0, 0.55));
  double ref = 0.0;
  for (std::size_t i = 0; i < v.grid.size(); ++i) {
    const Vec3 ctr = v.grid.center(i);
    ref += v.values[i] * oracle::box_plane_area(ctr - 0.5 * v.grid.spacing, ctr + 0.5 * v.grid.spacing, n, s);
  }
  CHECK(std::abs(plane_integral(v, {s, theta}) - ref) < 1e-12);
}

TEST_CASE("trace spectrum equals chi~ on the cone", "[radon][slice]") {
  const DispersiveScalar d = blob_phantom();
  const Units units{1.0};
  for (const Vec3& theta : {kE3, Vec3(0.2, 0.0, 1.0).normalized(), Vec3(-0.1, 0.3, 1.0).normalized()}) {
    TimeGrid grid{-8.0, 0.01, 1601};
    const auto m = trace_from_phantom(d, theta, grid, TraceModel::Continuous, units);
    CHECK(std::abs(m.front()) < 1e-12);
    CHECK(std::abs(m.back()) < 1e-12);
    for (double w : {0.5, 2.0, -3.0, 6.0}) {
      cplx acc = 0.0;
      for (std::size_t k = 0; k < grid.count; ++k) acc += m[k] * std::polar(1.0, w * grid.time(k)) * grid.dt;
      const Vec3 kv = (w / units.c) * (theta + kE3);
      cplx ref = 0.0;
      for (std::size_t b = 0; b < d.bins.count; ++b) {
        const double lo = d.bins.lo(b);
        const double hi = d.bins.hi(b);
        const cplx tint = (std::polar(1.0, w * hi) - std::polar(1.0, w * lo)) / cplx(0.0, w);
        for (const auto& blob : std::get<BlobSet>(d.slices[b]).blobs)
          ref += tint * oracle::gaussian_transform(kv, blob.center, blob.width, blob.amplitude);
      }
      CHECK(std::abs(acc - ref) < 1e-9 * std::max(1.0, std::abs(ref)));
    }
  }
}

TEST_CASE("discrete trace agrees with the binned defining sum", "[radon]") {
  const DispersiveScalar d = blob_phantom();
  const Vec3 theta = Vec3(0.1, 0.05, 1.0).normalized();
  const auto [n_lo, n_hi] = plane_index_range(d, theta);
  REQUIRE(n_hi >= n_lo);
  // Bins per T equal to the phantom's bins: the discrete model is exact.
  const RadonBins rb = radon_bins_from_phantom(d, {theta}, n_lo, n_hi, d.bins.count);
  TimeGrid grid{-static_cast<double>(n_hi + 2), 1.0 / 32.0, static_cast<std::size_t>(32 * (n_hi - n_lo + 4))};
  const auto a = trace_from_phantom(d, theta, grid, TraceModel::Discrete);
  const auto b = discrete_forward_trace(rb, 0, grid);
  double worst = 0.0;
  double scale = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    worst = std::max(worst, std::abs(a[k] - b[k]));
    scale = std::max(scale, std::abs(a[k]));
  }
  CHECK(scale > 0.0);
  CHECK(worst < 1e-12 * scale);
}

TEST_CASE("discrete trace of a single plane bin is a ramp", "[radon]") {
  // One plane n = 2, one bin of value 1 on [0, T): m(t) = (c/|v|) |{tau in [0,T): N(tau - t) = 2}|.
  RadonBins rb;
  rb.n_min = 2;
  rb.n_max = 2;
  rb.bins_per_T = 1;
  rb.T = 1.0;
  rb.thetas = {kE3};
  rb.values = {1.0};
  TimeGrid grid{-4.0, 0.125, 33};
  const auto m = discrete_forward_trace(rb, 0, grid);
  for (std::size_t k = 0; k < grid.count; ++k) {
    const double t = grid.time(k);
    // N(s) = 2 for s in [1.5, 2.5), i.e. tau in [t + 1.5, t + 2.5) intersected with [0, 1).
    const double len = std::max(0.0, std::min(1.0, t + 2.5) - std::max(0.0, t + 1.5));
    CHECK(m[k] == Catch::Approx(len / 2.0).margin(1e-14));
  }
}
