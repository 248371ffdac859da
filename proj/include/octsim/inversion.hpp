#pragma once

// Inversion of the measurement operator and the scalar reconstructions:
// cone Fourier samples, cone and axial inversion, and the dispersive
// time-bin recursion.

#include "octsim/forward.hpp"
#include "octsim/radon.hpp"

#include <optional>

namespace octsim {

/// chi~(w, (w/c)(theta + e3)) samples indexed [w][theta]. Unusable entries
/// are NaN with mask 0.
struct ChiTildeSamples {
  std::vector<double> omegas;
  std::vector<Vec3> thetas;
  Units units;
  std::vector<cplx> values;
  std::vector<std::uint8_t> mask;

  std::size_t n_omega() const { return omegas.size(); }
  std::size_t n_theta() const { return thetas.size(); }
  cplx& at(std::size_t w, std::size_t th) { return values[w * thetas.size() + th]; }
  cplx at(std::size_t w, std::size_t th) const { return values[w * thetas.size() + th]; }
  bool usable(std::size_t w, std::size_t th) const { return mask[w * thetas.size() + th] != 0; }
  std::size_t usable_count() const;
};

/// Inverts the measurement operator. Frequencies with
/// |f^(w)| < eps_f max|f^| are masked. `components` selects the field
/// components to recover; by default those with p_j != 0.
ScatteredSpectrum recover_scattered_spectrum(const MeasurementSet& m, double eps_f = 1e-3,
                                             std::optional<std::array<bool, 2>> components = std::nullopt);

/// Isotropic susceptibility transform from the recovered spectrum.
ChiTildeSamples extract_chi_tilde_isotropic(const ScatteredSpectrum& spectrum, const Geometry& geometry);

struct ConeSample {
  Vec3 k = Vec3::Zero();
  /// angle between k and sign(w) e3
  double angle = 0.0;
  bool in_cone = false;
};

/// k = (w/c)(theta + e3) and membership of the open double cone of
/// half-aperture pi/4 around the x3 axis.
ConeSample cone_coverage(const Vec3& theta, double omega, const Units& units = {});

struct ConeCoverageStats {
  std::size_t samples_used = 0;     ///< usable samples binned into the grid
  std::size_t samples_dropped = 0;  ///< usable samples beyond the grid Nyquist box
  std::size_t nodes_filled = 0;     ///< k-grid nodes with positive weight
  std::size_t nodes_total = 0;
};

struct ConeReconstruction {
  ScalarVoxels field;
  /// max |Im| / max |Re| of the inverse transform before taking the real part
  double imag_residual = 0.0;
  ConeCoverageStats coverage;
  /// k-grid node mask in FFT order (index m maps to m or m - N per axis)
  std::vector<std::uint8_t> k_mask;
};

/// Cloud-in-cell regridding of the samples onto the k-grid dual to `grid`,
/// zero fill outside the covered nodes, inverse 3D DFT.
ConeReconstruction cone_inversion(const ChiTildeSamples& samples, const VoxelGrid& grid);

struct AxialOptions {
  double taper_fraction = 0.25;  ///< raised-cosine taper width relative to the band edge
  double z0 = 0.0;
  double dz = 0.0;  ///< 0 picks half the resolution cell
  std::size_t count = 0;  ///< 0 picks the period of the frequency grid
};

struct AxialReconstruction {
  std::vector<double> z;
  std::vector<double> values;
  double resolution = 0.0;  ///< pi / k_max
  double taper_fraction = 0.0;
  std::size_t samples_used = 0;
};

/// Profile chi^(x3) from the theta = e3 samples by windowed inverse DFT over
/// k3 = 2 w / c.
AxialReconstruction axial_inversion(const ChiTildeSamples& samples, const AxialOptions& options = {});

/// Recovers plane data b_n(tau_m, theta) for n_min <= n <= n_max from the
/// traces, assuming b_n = 0 for n > n_max. Requires dt <= T/8.
RadonBins dispersive_recursion(const TraceSet& traces, double T, long n_max, long n_min,
                               std::size_t bins_per_T = 8);

/// Estimate of dm/dt at time t using stencils confined to the cell
/// [cell_lo, cell_hi]. Exposed for testing.
double cell_derivative(const std::vector<double>& values, const TimeGrid& grid, double cell_lo, double cell_hi,
                       double t);

}  // namespace octsim
