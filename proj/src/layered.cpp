#include "octsim/layered.hpp"

#include "octsim/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace octsim {

FresnelCoefficients fresnel(double chi_prev, double chi_next) {
  if (!(chi_prev > -1.0) || !(chi_next > -1.0))
    throw InvalidArgument("Fresnel coefficients need chi > -1 on both sides");
  const double n1 = std::sqrt(chi_prev + 1.0);
  const double n2 = std::sqrt(chi_next + 1.0);
  const double rho = (n1 - n2) / (n1 + n2);
  return {rho, 1.0 + rho};
}

CMat2 transfer_matrix(double chi_n, double L_n, double L_next, double omega, double rho_n, double tau_n,
                      const Units& units) {
  if (tau_n == 0.0) throw SingularMatrixError("transfer matrix undefined for tau = 0");
  if (!(L_n > L_next)) throw InvalidArgument("layer needs L_n > L_next");
  if (!(chi_n > -1.0)) throw InvalidArgument("layer susceptibility must exceed -1");
  const double phi = omega / units.c * std::sqrt(chi_n + 1.0) * (L_n - L_next);
  const cplx e = std::exp(kI * phi);
  const cplx ei = std::exp(-kI * phi);
  CMat2 M;
  M << e, rho_n * ei, rho_n * e, ei;
  return M / tau_n;
}

CMat2 stack_product(const std::vector<StackLayer>& layers, double omega, const Units& units) {
  CMat2 prod = CMat2::Identity();
  double chi_prev = 0.0;
  for (const auto& layer : layers) {
    const auto fr = fresnel(chi_prev, layer.chi);
    prod = prod * transfer_matrix(layer.chi, layer.top, layer.bottom, omega, fr.rho, fr.tau, units);
    chi_prev = layer.chi;
  }
  return prod;
}

IncidentField propagate_incident(const std::vector<StackLayer>& prefix, cplx E0, cplx E1r, double omega,
                                 const Units& units) {
  const CMat2 M = stack_product(prefix, omega, units);
  const cplx det = M.determinant();
  if (std::abs(det) < 1e-300) throw SingularMatrixError("transfer matrix product is singular");
  CMat2 inv;
  inv << M(1, 1), -M(0, 1), -M(1, 0), M(0, 0);
  inv /= det;
  const Eigen::Vector2cd out = inv * Eigen::Vector2cd(E0, E1r);
  return {out(0), out(1)};
}

ConsistentIncident incident_without_backward(const std::vector<StackLayer>& prefix, cplx E0, double omega,
                                             const Units& units) {
  const CMat2 M = stack_product(prefix, omega, units);
  if (std::abs(M(0, 0)) < 1e-300) throw SingularMatrixError("transfer matrix product has zero (1,1) entry");
  const cplx En = E0 / M(0, 0);
  return {En, M(1, 0) * En};
}

double pulse_peak_frequency(const Pulse& pulse) {
  const double top = kPi / pulse.dt();
  const std::size_t n = 2048;
  double best_w = 0.0;
  double best = -1.0;
  for (std::size_t i = 0; i <= n; ++i) {
    const double w = top * static_cast<double>(i) / static_cast<double>(n);
    const double a = std::abs(pulse.spectrum(w));
    if (a > best) {
      best = a;
      best_w = w;
    }
  }
  // golden-section refinement on the bracketing interval
  double lo = std::max(0.0, best_w - top / static_cast<double>(n));
  double hi = std::min(top, best_w + top / static_cast<double>(n));
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 60; ++it) {
    const double a = hi - g * (hi - lo);
    const double b = lo + g * (hi - lo);
    if (std::abs(pulse.spectrum(a)) > std::abs(pulse.spectrum(b)))
      hi = b;
    else
      lo = a;
  }
  return 0.5 * (lo + hi);
}

LayerStack layered_reconstruct(const TraceSet& traces, const Pulse& pulse, double T, const LayeredOptions& options) {
  std::optional<std::size_t> axis;
  for (std::size_t i = 0; i < traces.thetas.size(); ++i)
    if ((traces.thetas[i] - kE3).norm() < 1e-12) axis = i;
  if (!axis) throw ModeMismatchError("layered reconstruction needs the trace for theta = e3");
  if (!(T > 0.0)) throw InvalidArgument("bin width T must be positive");
  if (options.window == 0) throw InvalidArgument("detection window must be positive");
  const double c = traces.units.c;

  TraceSet axial{{kE3}, traces.grid, traces.units, {traces.values.at(*axis)}};
  LayerStack stack;
  bool nonzero = false;
  for (double v : axial.values[0]) nonzero = nonzero || v != 0.0;
  if (!nonzero) return stack;

  const long n_min = 0;
  const long n_max = static_cast<long>(std::floor(-traces.grid.t0 / T - 0.5 + 1e-9));
  if (n_max < n_min) throw RangeError("trace does not reach the top of the depth range");
  stack.raw = dispersive_recursion(axial, T, n_max, n_min, options.bins_per_T);
  const RadonBins& raw = stack.raw;
  const std::size_t M = raw.bins_per_T;

  // Jump per cell, top to bottom.
  stack.jumps.assign(raw.n_planes(), 0.0);
  double max_jump = 0.0;
  for (long n = n_max; n >= n_min; --n) {
    double d = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      const double above = n < n_max ? raw.at(0, n + 1, m) : 0.0;
      d = std::max(d, std::abs(raw.at(0, n, m) - above));
    }
    stack.jumps[static_cast<std::size_t>(n - n_min)] = d;
    max_jump = std::max(max_jump, d);
  }

  std::vector<double> history;
  for (long n = n_max; n >= n_min; --n) {
    const double d = stack.jumps[static_cast<std::size_t>(n - n_min)];
    std::vector<double> win(history.end() - static_cast<long>(std::min(history.size(), options.window)),
                            history.end());
    double median = 0.0;
    if (!win.empty()) {
      std::sort(win.begin(), win.end());
      const std::size_t h = win.size() / 2;
      median = win.size() % 2 ? win[h] : 0.5 * (win[h - 1] + win[h]);
    }
    if (d > options.threshold * median && d > options.floor * max_jump) stack.boundary_cells.push_back(n);
    history.push_back(d);
  }
  if (stack.boundary_cells.empty()) {
    std::ostringstream diag;
    diag << "cell jumps (n from " << n_max << " down):";
    for (long n = n_max; n >= n_min; --n) diag << ' ' << stack.jumps[static_cast<std::size_t>(n - n_min)];
    throw DetectionFailure("no layer boundary detected in a nonzero trace", diag.str());
  }

  // Boundary between planes n and n + 1 is placed halfway, at c (n + 1/2) T / 2.
  for (long n : stack.boundary_cells) stack.boundaries.push_back(c * (static_cast<double>(n) + 0.5) * T / 2.0);
  stack.boundaries.push_back(0.0);

  const double omega0 = options.omega0 > 0.0 ? options.omega0
                        : pulse.center_frequency() > 0.0 ? pulse.center_frequency()
                                                         : pulse_peak_frequency(pulse);
  stack.planes = raw;
  std::vector<StackLayer> prefix;
  const std::size_t layers = stack.boundary_cells.size();
  for (std::size_t k = 0; k < layers; ++k) {
    const long top_n = stack.boundary_cells[k];
    const long bottom_n = k + 1 < layers ? stack.boundary_cells[k + 1] + 1 : n_min;
    double att = 1.0;
    if (options.incident_update && !prefix.empty())
      att = std::abs(incident_without_backward(prefix, 1.0, omega0, traces.units).field);
    if (!(att > 0.0)) throw DetectionFailure("incident field vanished inside the stack", "");
    std::vector<double> profile(M, 0.0);
    const auto count = static_cast<double>(top_n - bottom_n + 1);
    for (long n = top_n; n >= bottom_n; --n)
      for (std::size_t m = 0; m < M; ++m) {
        stack.planes.at(0, n, m) = raw.at(0, n, m) / att;
        profile[m] += stack.planes.at(0, n, m) / count;
      }
    double spread = 0.0;
    for (long n = top_n; n >= bottom_n; --n)
      for (std::size_t m = 0; m < M; ++m) spread = std::max(spread, std::abs(stack.planes.at(0, n, m) - profile[m]));
    double chi = 0.0;
    for (double v : profile) chi += v * T / static_cast<double>(M);
    stack.profiles.push_back(profile);
    stack.static_chi.push_back(chi);
    stack.attenuation.push_back(att);
    stack.residuals.push_back(spread);
    prefix.push_back({stack.boundaries[k], stack.boundaries[k + 1], chi});
  }
  // Planes above the stack stay as recovered (ideally zero).
  return stack;
}

std::vector<double> layered_forward_trace(const Layered& phantom, const TimeGrid& grid, bool attenuation,
                                          double omega0, const Units& units) {
  validate_phantom(phantom, units);
  const double T = phantom.bins.T;
  const double c = units.c;
  const double L1 = phantom.boundaries.front();
  RadonBins rb;
  rb.n_min = 0;
  rb.n_max = static_cast<long>(std::ceil(2.0 * L1 / (c * T))) + 1;
  rb.bins_per_T = phantom.bins.count;
  rb.T = T;
  rb.thetas = {kE3};
  rb.values.assign(rb.n_planes() * rb.bins_per_T, 0.0);

  std::vector<double> att(phantom.layer_count(), 1.0);
  if (attenuation) {
    std::vector<StackLayer> prefix;
    for (std::size_t n = 0; n < phantom.layer_count(); ++n) {
      if (n > 0) att[n] = std::abs(incident_without_backward(prefix, 1.0, omega0, units).field);
      prefix.push_back({phantom.boundaries[n], phantom.boundaries[n + 1], phantom.static_chi(n)});
    }
  }
  for (long n = rb.n_min; n <= rb.n_max; ++n) {
    const double z = c * static_cast<double>(n) * T / 2.0;
    for (std::size_t layer = 0; layer < phantom.layer_count(); ++layer) {
      if (z >= phantom.boundaries[layer + 1] && z < phantom.boundaries[layer]) {
        for (std::size_t m = 0; m < rb.bins_per_T; ++m) rb.at(0, n, m) = att[layer] * phantom.profiles[layer][m];
      }
    }
  }
  return discrete_forward_trace(rb, 0, grid, units);
}

}  // namespace octsim
