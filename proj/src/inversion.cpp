#include "octsim/inversion.hpp"

#include "octsim/numeric.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

namespace octsim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::size_t ChiTildeSamples::usable_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

ScatteredSpectrum recover_scattered_spectrum(const MeasurementSet& m, double eps_f,
                                             std::optional<std::array<bool, 2>> components) {
  const Geometry& geo = m.geometry;
  const auto grid = FrequencyGrid::from_mirrors(geo.mirrors, geo.units);
  const Vec3& p = geo.polarization;
  std::array<bool, 2> want{p.x() != 0.0, p.y() != 0.0};
  if (components) {
    for (std::size_t j = 0; j < 2; ++j)
      if ((*components)[j] && p[static_cast<Eigen::Index>(j)] == 0.0)
        throw InvalidArgument("component " + std::to_string(j + 1) + " requested but p_" +
                              std::to_string(j + 1) + " = 0");
    want = *components;
  }
  if (m.values.size() != m.n_mirror() * m.n_det() * 2)
    throw ConfigurationError("measurement array does not match the geometry");

  ScatteredSpectrum s;
  s.omegas = grid.values();
  s.thetas = geo.directions;
  for (std::size_t det = 0; det < s.thetas.size(); ++det) s.rhos.push_back(geo.detector_distance(det));
  s.components = {want[0], want[1], false};
  s.pulse_spectrum.resize(grid.size());
  double fmax = 0.0;
  for (std::size_t w = 0; w < grid.size(); ++w) {
    s.pulse_spectrum[w] = m.pulse.spectrum(grid[w]);
    fmax = std::max(fmax, std::abs(s.pulse_spectrum[w]));
  }
  s.mask.assign(grid.size(), 0);
  for (std::size_t w = 0; w < grid.size(); ++w)
    s.mask[w] = (fmax > 0.0 && std::abs(s.pulse_spectrum[w]) >= eps_f * fmax) ? 1 : 0;
  if (std::count(s.mask.begin(), s.mask.end(), std::uint8_t{1}) == 0)
    throw DegenerateDataError("pulse spectrum is below the threshold on the whole frequency grid");

  const CVec3 nan_vec = CVec3::Constant(cplx(kNaN, kNaN));
  s.values.assign(grid.size() * s.thetas.size(), nan_vec);
  const double c = geo.units.c;
  const double dr = geo.mirrors.dr;
  for (std::size_t w = 0; w < grid.size(); ++w) {
    if (!s.mask[w]) continue;
    const double omega = grid[w];
    for (std::size_t det = 0; det < s.thetas.size(); ++det) {
      CVec3 out = nan_vec;
      for (std::size_t j = 0; j < 2; ++j) {
        if (!want[j]) continue;
        const cplx sum = pairwise_sum<cplx>(m.n_mirror(), [&](std::size_t r) {
          return m.at(r, det, j) * std::exp(-kI * (omega * (2.0 * geo.mirrors.position(r) - geo.d) / c));
        });
        out[static_cast<Eigen::Index>(j)] =
            -(2.0 / c) * sum * dr / (std::conj(s.pulse_spectrum[w]) * p[static_cast<Eigen::Index>(j)]);
      }
      s.at(w, det) = out;
    }
  }
  return s;
}

ChiTildeSamples extract_chi_tilde_isotropic(const ScatteredSpectrum& spectrum, const Geometry& geometry) {
  const Vec3& p = geometry.polarization;
  for (std::size_t j = 0; j < 2; ++j)
    if (p[static_cast<Eigen::Index>(j)] != 0.0 && !spectrum.components[j])
      throw InvalidArgument("spectrum lacks component " + std::to_string(j + 1) + " needed for p");
  const double c = geometry.units.c;
  ChiTildeSamples out;
  out.omegas = spectrum.omegas;
  out.thetas = spectrum.thetas;
  out.units = geometry.units;
  out.values.assign(out.omegas.size() * out.thetas.size(), cplx(kNaN, kNaN));
  out.mask.assign(out.values.size(), 0);
  for (std::size_t th = 0; th < out.thetas.size(); ++th) {
    const Vec3& theta = out.thetas[th];
    const double denom = theta.dot(p) * theta.dot(p) - p.squaredNorm();
    if (std::abs(denom) < 1e-12)
      throw DegenerateDataError("polarization combination is degenerate for this direction");
    const double rho = spectrum.rhos[th];
    for (std::size_t w = 0; w < out.omegas.size(); ++w) {
      if (!spectrum.mask[w]) continue;
      const double omega = out.omegas[w];
      const cplx fh = spectrum.pulse_spectrum[w];
      const cplx factor = -4.0 * kPi * rho * c * c / (omega * omega * fh * std::exp(kI * (omega * rho / c)));
      cplx comb{};
      for (std::size_t j = 0; j < 2; ++j) {
        const double pj = p[static_cast<Eigen::Index>(j)];
        if (pj != 0.0) comb += pj * spectrum.at(w, th)[static_cast<Eigen::Index>(j)] * factor;
      }
      out.at(w, th) = comb / denom;
      out.mask[w * out.thetas.size() + th] = 1;
    }
  }
  return out;
}

ConeSample cone_coverage(const Vec3& theta, double omega, const Units& units) {
  if (!(theta.z() > 0.0)) throw InvalidArgument("detector direction needs theta_3 > 0");
  ConeSample s;
  s.k = (omega / units.c) * (theta + kE3);
  if (omega == 0.0) return s;
  const double sgn = omega > 0.0 ? 1.0 : -1.0;
  const double cosang = std::clamp(sgn * s.k.z() / s.k.norm(), -1.0, 1.0);
  s.angle = std::acos(cosang);
  s.in_cone = s.angle < kPi / 4.0;
  return s;
}

ConeReconstruction cone_inversion(const ChiTildeSamples& samples, const VoxelGrid& grid) {
  grid.validate();
  if (samples.usable_count() == 0) throw DegenerateDataError("no usable cone samples");
  const auto& dims = grid.dims;
  const Vec3 dk(2.0 * kPi / (static_cast<double>(dims[0]) * grid.spacing.x()),
                2.0 * kPi / (static_cast<double>(dims[1]) * grid.spacing.y()),
                2.0 * kPi / (static_cast<double>(dims[2]) * grid.spacing.z()));
  const std::size_t total = grid.size();
  std::vector<cplx> acc(total, cplx{});
  std::vector<double> weight(total, 0.0);
  ConeReconstruction rec;

  auto wrap = [&](long m, int axis) {
    const long n = static_cast<long>(dims[static_cast<std::size_t>(axis)]);
    return static_cast<std::size_t>(m < 0 ? m + n : m);
  };
  for (std::size_t w = 0; w < samples.n_omega(); ++w) {
    for (std::size_t th = 0; th < samples.n_theta(); ++th) {
      if (!samples.usable(w, th)) continue;
      const Vec3 k = (samples.omegas[w] / samples.units.c) * (samples.thetas[th] + kE3);
      const Vec3 g = k.cwiseQuotient(dk);
      bool inside = true;
      for (int a = 0; a < 3; ++a) {
        const double lim = static_cast<double>(dims[static_cast<std::size_t>(a)] / 2) - 1.0;
        if (std::abs(g[a]) > lim) inside = false;
      }
      if (!inside) {
        ++rec.coverage.samples_dropped;
        continue;
      }
      ++rec.coverage.samples_used;
      const cplx v = samples.at(w, th);
      std::array<long, 3> base{};
      std::array<double, 3> frac{};
      for (int a = 0; a < 3; ++a) {
        base[static_cast<std::size_t>(a)] = static_cast<long>(std::floor(g[a]));
        frac[static_cast<std::size_t>(a)] = g[a] - std::floor(g[a]);
      }
      for (int corner = 0; corner < 8; ++corner) {
        double wt = 1.0;
        std::array<std::size_t, 3> idx{};
        for (int a = 0; a < 3; ++a) {
          const int bit = (corner >> a) & 1;
          const auto ua = static_cast<std::size_t>(a);
          wt *= bit ? frac[ua] : 1.0 - frac[ua];
          idx[ua] = wrap(base[ua] + bit, a);
        }
        if (wt <= 0.0) continue;
        const std::size_t flat = grid.index(idx[0], idx[1], idx[2]);
        acc[flat] += wt * v;
        weight[flat] += wt;
      }
    }
  }

  fftw_complex* buf = fftw_alloc_complex(total);
  std::unique_ptr<fftw_complex, decltype(&fftw_free)> guard(buf, &fftw_free);
  rec.k_mask.assign(total, 0);
  const double scale = dk.prod() / std::pow(2.0 * kPi, 3);
  for (std::size_t flat = 0; flat < total; ++flat) {
    cplx v{};
    if (weight[flat] > 0.0) {
      rec.k_mask[flat] = 1;
      ++rec.coverage.nodes_filled;
      const auto idx = grid.unravel(flat);
      Vec3 k;
      for (int a = 0; a < 3; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        const long n = static_cast<long>(dims[ua]);
        long m = static_cast<long>(idx[ua]);
        if (m >= n / 2) m -= n;
        k[a] = static_cast<double>(m) * dk[a];
      }
      v = acc[flat] / weight[flat] * std::exp(kI * k.dot(grid.origin)) * scale;
    }
    buf[flat][0] = v.real();
    buf[flat][1] = v.imag();
  }
  rec.coverage.nodes_total = total;

  fftw_plan plan = fftw_plan_dft_3d(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]),
                                    buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);

  rec.field.grid = grid;
  rec.field.values.resize(total);
  double re_max = 0.0;
  double im_max = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    rec.field.values[i] = buf[i][0];
    re_max = std::max(re_max, std::abs(buf[i][0]));
    im_max = std::max(im_max, std::abs(buf[i][1]));
  }
  rec.imag_residual = re_max > 0.0 ? im_max / re_max : im_max;
  return rec;
}

AxialReconstruction axial_inversion(const ChiTildeSamples& samples, const AxialOptions& options) {
  std::optional<std::size_t> axis;
  for (std::size_t th = 0; th < samples.n_theta(); ++th)
    if ((samples.thetas[th] - kE3).norm() < 1e-12) axis = th;
  if (!axis) throw ModeMismatchError("axial inversion needs samples for the direction theta = e3");
  if (!(options.taper_fraction >= 0.0 && options.taper_fraction <= 1.0))
    throw InvalidArgument("taper fraction must lie in [0, 1]");
  const double c = samples.units.c;

  double step = std::numeric_limits<double>::infinity();
  for (double w : samples.omegas)
    if (w > 0.0) step = std::min(step, w);
  double w_lo = std::numeric_limits<double>::infinity();
  double w_hi = 0.0;
  std::vector<std::size_t> used;
  for (std::size_t w = 0; w < samples.n_omega(); ++w) {
    if (!samples.usable(w, *axis)) continue;
    used.push_back(w);
    w_lo = std::min(w_lo, std::abs(samples.omegas[w]));
    w_hi = std::max(w_hi, std::abs(samples.omegas[w]));
  }
  if (used.empty()) throw DegenerateDataError("no usable axial samples");

  AxialReconstruction out;
  out.taper_fraction = options.taper_fraction;
  out.samples_used = used.size();
  const double k_max = 2.0 * w_hi / c;
  out.resolution = kPi / k_max;

  // Raised-cosine taper on |w|; the lower band edge is tapered only when the
  // band does not reach down to the first grid frequency.
  const double band = w_hi - w_lo + step;
  const double taper = options.taper_fraction * band;
  const bool taper_low = w_lo > 1.5 * step;
  auto window = [&](double omega) {
    const double a = std::abs(omega);
    double wv = 1.0;
    if (taper > 0.0 && a > w_hi - taper) wv *= 0.5 * (1.0 + std::cos(kPi * (a - (w_hi - taper)) / taper));
    if (taper_low && taper > 0.0 && a < w_lo + taper)
      wv *= 0.5 * (1.0 + std::cos(kPi * ((w_lo + taper) - a) / taper));
    return wv;
  };

  const double dz = options.dz > 0.0 ? options.dz : 0.5 * out.resolution;
  std::size_t count = options.count;
  if (count == 0) count = static_cast<std::size_t>(std::llround(kPi * c / step / dz));
  out.z.resize(count);
  out.values.resize(count);
  const double dk = 2.0 * step / c;
  for (std::size_t i = 0; i < count; ++i) {
    const double z = options.z0 + dz * static_cast<double>(i);
    out.z[i] = z;
    const cplx sum = pairwise_sum<cplx>(used.size(), [&](std::size_t u) {
      const std::size_t w = used[u];
      const double k3 = 2.0 * samples.omegas[w] / c;
      return window(samples.omegas[w]) * samples.at(w, *axis) * std::exp(kI * (k3 * z));
    });
    out.values[i] = (sum * dk / (2.0 * kPi)).real();
  }
  return out;
}

double cell_derivative(const std::vector<double>& values, const TimeGrid& grid, double cell_lo, double cell_hi,
                       double t) {
  const double eps = 1e-9;
  const double s_lo = (cell_lo - grid.t0) / grid.dt;
  const double s_hi = (cell_hi - grid.t0) / grid.dt;
  const long ka = static_cast<long>(std::ceil(s_lo - eps));
  const long kb = static_cast<long>(std::floor(s_hi + eps));
  if (ka < 0 || kb >= static_cast<long>(values.size()) || kb - ka < 2)
    throw RangeError("trace samples do not cover the requested cell");
  const double dt = grid.dt;
  auto v = [&](long k) { return values[static_cast<std::size_t>(k)]; };
  auto deriv = [&](long k) {
    if (k == ka) return (-3.0 * v(k) + 4.0 * v(k + 1) - v(k + 2)) / (2.0 * dt);
    if (k == kb) return (3.0 * v(k) - 4.0 * v(k - 1) + v(k - 2)) / (2.0 * dt);
    return (v(k + 1) - v(k - 1)) / (2.0 * dt);
  };
  const double s = (t - grid.t0) / dt;
  const long j = std::clamp(static_cast<long>(std::floor(s)), ka, kb - 1);
  const double frac = s - static_cast<double>(j);
  return (1.0 - frac) * deriv(j) + frac * deriv(j + 1);
}

RadonBins dispersive_recursion(const TraceSet& traces, double T, long n_max, long n_min, std::size_t bins_per_T) {
  if (!(T > 0.0)) throw InvalidArgument("bin width T must be positive");
  if (n_max < n_min) throw InvalidArgument("empty plane index window");
  if (bins_per_T == 0) throw InvalidArgument("bins_per_T must be positive");
  if (!(traces.grid.dt > 0.0) || traces.grid.dt > T / 8.0 * (1.0 + 1e-12))
    throw InvalidArgument("trace time step must not exceed T/8");
  const double need_lo = -(static_cast<double>(n_max) + 0.5) * T;
  const double need_hi = -(static_cast<double>(n_min) - 0.5) * T;
  const double have_lo = traces.grid.t0;
  const double have_hi = traces.grid.time(traces.grid.count == 0 ? 0 : traces.grid.count - 1);
  const double slack = 1e-9 * traces.grid.dt;
  if (traces.grid.count == 0 || have_lo > need_lo + slack || have_hi < need_hi - slack) {
    std::ostringstream msg;
    msg << "trace covers t in [" << have_lo << ", " << have_hi << "] but planes " << n_min << ".." << n_max
        << " need [" << need_lo << ", " << need_hi << "]";
    throw RangeError(msg.str());
  }

  RadonBins rb;
  rb.n_min = n_min;
  rb.n_max = n_max;
  rb.bins_per_T = bins_per_T;
  rb.T = T;
  rb.thetas = traces.thetas;
  rb.values.assign(traces.thetas.size() * rb.n_planes() * bins_per_T, 0.0);
  for (std::size_t th = 0; th < traces.thetas.size(); ++th) {
    const double K = (traces.thetas[th] + kE3).norm() / traces.units.c;
    const auto& vals = traces.values.at(th);
    if (vals.size() != traces.grid.count) throw ConfigurationError("trace length does not match its time grid");
    for (long n = n_max; n >= n_min; --n) {
      const double shift = (static_cast<double>(n) + 0.5) * T;
      for (std::size_t m = 0; m < bins_per_T; ++m) {
        const double above = n < n_max ? rb.at(th, n + 1, m) : 0.0;
        const double d = cell_derivative(vals, traces.grid, -shift, -shift + T, rb.tau(m) - shift);
        rb.at(th, n, m) = above + K * d;
      }
    }
  }
  return rb;
}

}  // namespace octsim
