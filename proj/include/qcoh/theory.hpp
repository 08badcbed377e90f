#pragma once

// Closed-form estimates of the long-time-averaged qubit coherence
// rho-bar_{12} for a qubit coupled to a chaotic environment through
// H^I = H^IS (x) H^IE, with h(E) the smooth diagonal part of H^IE.

#include <complex>
#include <string>

#include "qcoh/quench.hpp"
#include "qcoh/spectral_stats.hpp"

namespace qcoh {

/// eta_d = (H^IS_11 - H^IS_22) / (E^S_2 - E^S_1), eta_r = H^IS_12 / (E^S_2 - E^S_1).
struct EtaCoefficients {
  double eta_d = 0.0;
  double eta_r = 0.0;
};

EtaCoefficients eta_coefficients(const QubitParams& q, const InteractionSpec& i);

struct PredictionInput {
  QubitState c;
  SmoothCurve h_curve;  // h(E) of the environment operator in H^IE
  double e0 = 0.0;
  double delta_s = 0.6;
  double rho11 = 0.0;   // exact rho-bar_11 (intermediate / generic forms)
  double rho22 = 0.0;   // exact rho-bar_22

  double h0() const { return h_curve(e0); }
  /// E_alpha = E_0 + |c_beta|^2 (E^S_beta - E^S_alpha), beta != alpha.
  double shifted_energy(int alpha) const;
};

struct Prediction {
  std::complex<double> value;
  bool valid = true;
  std::string note;
};

/// Very weak coupling: eta_r (|c_2|^2 - |c_1|^2) h_0.
/// Flagged invalid when ||c_1|^2 - |c_2|^2| < 0.1.
Prediction predict_weak(const PredictionInput& in, const EtaCoefficients& eta);

/// Relatively weak to intermediate coupling with H^IS_aa = 0:
/// eta_r (h_2 rho_22 - h_1 rho_11), h_alpha = h(E_alpha).
Prediction predict_intermediate(const PredictionInput& in, const EtaCoefficients& eta);

/// Generic H^IS: eta_r / (1 - eta_d h_0) (h_2 rho_22 - h_1 rho_11).
/// Throws NearSingularityError when |1 - eta_d h_0| <= 0.05.
Prediction predict_generic(const PredictionInput& in, const EtaCoefficients& eta);

/// The same combination for an arbitrary ordered label pair; used to check
/// the antisymmetry under (alpha, beta) exchange.
std::complex<double> intermediate_combination(const PredictionInput& in, const EtaCoefficients& eta,
                                              int alpha, int beta);

}  // namespace qcoh
