#pragma once

// Layered media at normal incidence: Fresnel coefficients, transfer
// matrices, the incident field inside the stack and the layer-by-layer
// reconstruction from an axial trace.

#include "octsim/radon.hpp"

#include <string>
#include <vector>

namespace octsim {

struct FresnelCoefficients {
  double rho = 0.0;  ///< reflection
  double tau = 1.0;  ///< transmission, 1 + rho
};

/// Interface from susceptibility chi_prev (above) to chi_next (below).
FresnelCoefficients fresnel(double chi_prev, double chi_next);

/// M_n = (1/tau_n) [[e^{i phi}, rho_n e^{-i phi}], [rho_n e^{i phi}, e^{-i phi}]],
/// phi = (w/c) sqrt(chi_n + 1)(L_n - L_next).
CMat2 transfer_matrix(double chi_n, double L_n, double L_next, double omega, double rho_n, double tau_n,
                      const Units& units = {});

/// Layer with static susceptibility chi on [bottom, top).
struct StackLayer {
  double top = 0.0;
  double bottom = 0.0;
  double chi = 0.0;
};

/// M_1 ... M_k for the given layers, the first one lying under vacuum.
CMat2 stack_product(const std::vector<StackLayer>& layers, double omega, const Units& units = {});

struct IncidentField {
  cplx field;     ///< first component of (M_1 ... M_{n-1})^{-1} (E0, E1r)
  cplx residual;  ///< second component, zero for consistent inputs
};

/// Field incident on the layer below `prefix`.
IncidentField propagate_incident(const std::vector<StackLayer>& prefix, cplx E0, cplx E1r, double omega,
                                 const Units& units = {});

struct ConsistentIncident {
  cplx field;      ///< E_n = E0 / (M_1 ... M_{n-1})_{11}
  cplx reflected;  ///< E1r = (M_1 ... M_{n-1})_{21} E_n
};

/// Incident field below `prefix` when no backward wave travels in that layer.
ConsistentIncident incident_without_backward(const std::vector<StackLayer>& prefix, cplx E0, double omega,
                                             const Units& units = {});

struct LayeredOptions {
  double threshold = 5.0;     ///< jump / trailing median ratio marking a boundary
  std::size_t window = 4;     ///< trailing window length in cells
  double floor = 1e-6;        ///< jumps below floor * max jump are ignored
  bool incident_update = true;
  std::size_t bins_per_T = 8;
  double omega0 = 0.0;        ///< frequency used for the incident update; 0 picks the pulse peak
};

struct LayerStack {
  std::vector<double> boundaries;            ///< L_1 > ... > L_{N+1} = 0; empty for vacuum
  std::vector<std::vector<double>> profiles;  ///< [layer][bin] at the RadonBins bin centres
  std::vector<double> static_chi;            ///< int chi_n d tau
  std::vector<double> attenuation;           ///< |E_n / E0| used to rescale each layer
  std::vector<double> residuals;             ///< max spread of the plane values about the layer profile
  std::vector<long> boundary_cells;          ///< first plane index of each layer
  std::vector<double> jumps;                 ///< max_m |b'_n - b'_{n+1}|, indexed n - n_min
  RadonBins raw;                             ///< plain recursion output
  RadonBins planes;                          ///< after the incident-field rescaling
};

/// Reconstructs a layer stack from the theta = e3 trace. Throws
/// ModeMismatchError without an axial trace and DetectionFailure when the
/// trace is nonzero but no boundary is found.
LayerStack layered_reconstruct(const TraceSet& traces, const Pulse& pulse, double T,
                               const LayeredOptions& options = {});

/// Discrete defining-sum trace of a layered phantom along e3. With
/// `attenuation`, plane data of layer n are scaled by |E_n / E0| at omega0.
std::vector<double> layered_forward_trace(const Layered& phantom, const TimeGrid& grid, bool attenuation,
                                          double omega0, const Units& units = {});

/// Frequency of the largest |f^| on [0, pi/dt] (coarse scan then refinement).
double pulse_peak_frequency(const Pulse& pulse);

}  // namespace octsim
