#include "qcoh/theory.hpp"

#include <cmath>

#include "qcoh/error.hpp"

namespace qcoh {

namespace {

constexpr double kBalanceThreshold = 0.1;
constexpr double kDenominatorThreshold = 0.05;

double rho_diag(const PredictionInput& in, int alpha) { return alpha == 1 ? in.rho11 : in.rho22; }

}  // namespace

EtaCoefficients eta_coefficients(const QubitParams& q, const InteractionSpec& i) {
  q.validate();
  const Eigen::Matrix2d his = system_operator_energy_basis(i);
  const double gap = q.level(2) - q.level(1);
  return {(his(0, 0) - his(1, 1)) / gap, his(0, 1) / gap};
}

double PredictionInput::shifted_energy(int alpha) const {
  const int beta = alpha == 1 ? 2 : 1;
  const double level_diff = (beta == 2 ? 1.0 : -1.0) * delta_s;  // E^S_beta - E^S_alpha
  return e0 + c.weight(beta) * level_diff;
}

std::complex<double> intermediate_combination(const PredictionInput& in, const EtaCoefficients& eta,
                                              int alpha, int beta) {
  const double h_alpha = in.h_curve(in.shifted_energy(alpha));
  const double h_beta = in.h_curve(in.shifted_energy(beta));
  return eta.eta_r * (h_beta * rho_diag(in, beta) - h_alpha * rho_diag(in, alpha));
}

Prediction predict_weak(const PredictionInput& in, const EtaCoefficients& eta) {
  Prediction p;
  const double imbalance = in.c.weight(2) - in.c.weight(1);
  p.value = eta.eta_r * imbalance * in.h0();
  if (std::abs(imbalance) < kBalanceThreshold) {
    p.valid = false;
    p.note = "|c1|^2 close to |c2|^2: neglected terms may dominate";
  }
  return p;
}

Prediction predict_intermediate(const PredictionInput& in, const EtaCoefficients& eta) {
  return {intermediate_combination(in, eta, 1, 2), true, {}};
}

Prediction predict_generic(const PredictionInput& in, const EtaCoefficients& eta) {
  const double denom = 1.0 - eta.eta_d * in.h0();
  if (std::abs(denom) <= kDenominatorThreshold) {
    throw NearSingularityError("|1 - eta_d h_0| = " + std::to_string(std::abs(denom)) +
                               " too small for a reliable prediction");
  }
  return {intermediate_combination(in, eta, 1, 2) / denom, true, {}};
}

}  // namespace qcoh
