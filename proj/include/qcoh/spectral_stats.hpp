#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qcoh/eigensolve.hpp"

namespace qcoh {

// ---------------------------------------------------------------------------
// Level statistics

struct UnfoldSpec {
  int degree = 7;          // highest polynomial degree of the staircase fit
  std::size_t min_levels = 50;
};

struct UnfoldedSpectrum {
  std::vector<double> levels;    // fitted staircase evaluated at each E_n
  std::vector<double> spacings;  // successive differences of `levels`
};

/// Maps E_n through a polynomial fit of the cumulative level count (degree
/// lowered until the fit is non-decreasing), rescaled so the unfolded spacings
/// have mean exactly 1.
/// Throws InsufficientDataError for fewer than spec.min_levels levels.
UnfoldedSpectrum unfold_spectrum(std::span<const double> energies, const UnfoldSpec& spec = {});

/// Central `fraction` of an ascending sequence (e.g. 0.6 drops 20% at each end).
std::vector<double> middle_fraction(std::span<const double> energies, double fraction = 0.6);

struct SpacingStats {
  std::vector<double> unfolded_spacings;
  double mean = 0.0;
  double ks_wigner = 1.0;
  double ks_poisson = 1.0;
};

SpacingStats spacing_distribution(std::span<const double> spacings);

double wigner_dyson_pdf(double s);
double wigner_dyson_cdf(double s);
double poisson_cdf(double s);
double standard_normal_cdf(double x);

/// Two-sided one-sample Kolmogorov-Smirnov distance sup |F_n(x) - F(x)|.
double ks_distance(std::span<const double> samples, const std::function<double(double)>& cdf);

// ---------------------------------------------------------------------------
// Eigenstate-thermalization diagnostics

struct EthStats {
  std::string observable_label;
  SpectralWindow shell;
  Index level_count = 0;
  double mu = 0.0;
  double sigma_d = 0.0;
  double sigma_nd = 0.0;
  std::vector<double> offdiag_samples;  // off-diagonal elements / sigma_nd (i < j)
  double ks_gauss = 1.0;
};

/// <i|obs|j> for all eigenpairs held by `es`.
RealMatrix eigenbasis_elements(const EigenSystem& es, const OperatorMatrix& obs);

/// Mean and standard deviation of diagonal elements for E_i in the shell.
/// Needs at least `min_levels` levels in the shell.
EthStats eth_diagonal_stats(const EigenSystem& es, const OperatorMatrix& obs,
                            const SpectralWindow& shell, Index min_levels = 100);

/// RMS of off-diagonal elements over i != j in the shell and the KS distance of
/// the rescaled elements to the unit normal.
EthStats eth_offdiag_stats(const EigenSystem& es, const OperatorMatrix& obs,
                           const SpectralWindow& shell, Index min_levels = 100);

// ---------------------------------------------------------------------------
// Smooth curves

/// Piecewise-linear function on a strictly increasing grid.
struct SmoothCurve {
  std::vector<double> support;
  std::vector<double> values;
  double window_width = 0.0;

  bool covers(double e) const;
  /// Linear interpolation; throws ExtrapolationError outside the support.
  double operator()(double e) const;
};

/// Sliding-window average of `values` sampled at ascending `energies`.
/// At each grid point the window is the wider of `window_width` and the span of
/// the `min_span_levels` nearest levels. Grid step is window_width / 4.
SmoothCurve sliding_average(std::span<const double> energies, std::span<const double> values,
                            double window_width, Index min_span_levels = 50);

/// h(E): smoothed diagonal elements of `obs` in the eigenbasis of `es`.
SmoothCurve smooth_h_of_E(const EigenSystem& es, const OperatorMatrix& obs, double window_width);

}  // namespace qcoh
