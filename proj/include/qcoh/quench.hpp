#pragma once

// Long-time averages for a qubit quenched together with a chaotic chain.
//
// Qubit levels are labelled alpha = 1 (lower, E^S_1) and alpha = 2 (upper).
// All 2x2 matrices below are indexed in that order: entry (0, 0) is alpha = 1.
// Environment eigenstates |i> come from diagonalizing H^E alone; total
// eigenstates |n> from diagonalizing H. C^n_{alpha i} = <alpha i|n>.

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qcoh/eigensolve.hpp"
#include "qcoh/spectral_stats.hpp"

namespace qcoh {

using Complex = std::complex<double>;
using Rdm = Eigen::Matrix2cd;

inline constexpr double kDegeneracyTol = 1e-10;

struct EnergyShell {
  double center = 0.0;
  double width = 0.0;
  std::vector<Index> members;  // indices into the environment eigensystem

  Index count() const { return static_cast<Index>(members.size()); }
  /// Chain eigenstates with E_i in the closed interval [center - width/2, center + width/2].
  static EnergyShell build(const EigenSystem& env, double center, double width);
  /// Advisory: fewer than 30 members makes shell averages noisy.
  bool statistically_valid() const { return count() >= 30; }
};

struct QubitState {
  Complex c1{1.0, 0.0};
  Complex c2{0.0, 0.0};

  /// Throws ConfigurationError unless |c1|^2 + |c2|^2 = 1 within 1e-12.
  void validate() const;
  Complex amplitude(int alpha) const { return alpha == 1 ? c1 : c2; }
  double weight(int alpha) const { return std::norm(amplitude(alpha)); }
};

struct InitialState {
  QubitState qubit;
  EnergyShell shell;
  Eigen::VectorXcd shell_coefficients;  // C^(0)_i over shell members, Gaussian
  std::uint64_t seed = 0;
  Eigen::VectorXcd environment;         // |E_0> in the chain computational basis, unit norm
  Eigen::VectorXcd total;               // |phi_S> (x) |E_0> in the total computational basis
};

/// Random typical state on the shell: independent complex Gaussians C^(0)_i,
/// normalized. Deterministic in `seed`.
InitialState sample_shell_state(const EigenSystem& env, const EnergyShell& shell,
                                const QubitState& c, std::uint64_t seed);

enum class AverageMethod { spectral, time_grid };

struct RdmAverage {
  Rdm matrix = Rdm::Zero();
  int realization_count = 1;
  AverageMethod method = AverageMethod::spectral;
  std::vector<std::string> warnings;

  /// rho_{alpha beta}, 1-based labels.
  Complex operator()(int alpha, int beta) const { return matrix(alpha - 1, beta - 1); }
  Complex coherence() const { return matrix(0, 1); }
};

/// Exact long-time average rho-bar^S from the total eigensystem. Levels closer
/// than `degeneracy_tol` are treated as one degenerate subspace (and flagged).
RdmAverage lta_rdm(const EigenSystem& total, const InitialState& psi0,
                   double degeneracy_tol = kDegeneracyTol);

/// Mean of rho-bar^S over several shell-state seeds.
RdmAverage average_realizations(const std::vector<RdmAverage>& runs);

/// rho^S(t) for every time in `times`.
std::vector<Rdm> evolve_rdm(const EigenSystem& total, const InitialState& psi0,
                            std::span<const double> times);

/// Uniform time grid of `points` samples on [0, t_max].
std::vector<double> uniform_time_grid(double t_max, std::size_t points);

/// Mean of rho^S(t) over grid points with t > t_min. Warns when fewer than 100
/// samples remain or they span less than t_min; `shell_count`, when known,
/// sizes the residual-fluctuation estimate in that warning.
RdmAverage time_grid_average(std::span<const Rdm> series, std::span<const double> times,
                             double t_min, Index shell_count = 0);

/// C^n_{alpha i} for alpha = 1, 2: rows = environment eigenstates i,
/// columns = total eigenstates n.
struct ProductAmplitudes {
  RealMatrix c1;
  RealMatrix c2;
  const RealMatrix& operator[](int alpha) const { return alpha == 1 ? c1 : c2; }
};

ProductAmplitudes product_amplitudes(const EigenSystem& total, const EigenSystem& env);

struct BranchWeights {
  /// q_profile[alpha-1][beta-1](i) = Q^(beta)_{alpha i}
  std::array<std::array<Eigen::VectorXd, 2>, 2> q_profile;
  /// q_sums(alpha-1, beta-1) = Q^(beta)_alpha
  Eigen::Matrix2d q_sums = Eigen::Matrix2d::Zero();
  /// populations.col(alpha-1)(n) = B_alpha(E_n)
  RealMatrix populations;
  /// Q_alpha from the smoothed populations at E_0 + E^S_1 and E_0 + E^S_2.
  Eigen::Vector2d q_alpha = Eigen::Vector2d::Zero();
  /// R_alpha = Q^(alpha)_alpha / Q^(beta)_alpha; NaN when the cross weight vanishes.
  Eigen::Vector2d ratio = Eigen::Vector2d::Constant(std::numeric_limits<double>::quiet_NaN());
  /// Largest 1 - sum_n |C^n_{beta j}|^2 over shell members j and beta.
  double completeness_deficit = 0.0;
  std::vector<std::string> warnings;

  double q(int alpha, int beta, Index i) const { return q_profile[alpha - 1][beta - 1](i); }
  double q_sum(int alpha, int beta) const { return q_sums(alpha - 1, beta - 1); }
  double r(int alpha) const { return ratio(alpha - 1); }
};

struct BranchOptions {
  double completeness_threshold = 0.01;
  /// Window for smoothing B_alpha(E_n) when evaluating Q_alpha.
  double population_window = 0.3;
};

/// Typicality-averaged sub-branch profiles
///   Q^(beta)_{alpha i} = (1/N_shell) sum_n sum_{j in shell} |C^n_{alpha i}|^2 |C^n_{beta j}|^2.
BranchWeights branch_weights(const EigenSystem& total, const EigenSystem& env,
                             const EnergyShell& shell, const QubitParams& qubit,
                             const BranchOptions& options = {});

/// Same quantities from a concrete random shell state:
///   Q^(beta)_{alpha i} = sum_n |C^n_{alpha i}|^2 |sum_j a_j C^n_{beta j}|^2, a = shell amplitudes.
BranchWeights branch_weights_exact(const EigenSystem& total, const EigenSystem& env,
                                   const InitialState& psi0, const QubitParams& qubit,
                                   const BranchOptions& options = {});

struct CoarseProfile {
  SmoothCurve curve;
  double center_of_mass = 0.0;
  /// Half width at half maximum of the coarse-grained curve.
  double half_width = 0.0;
};

/// Windowed average of profile(i) against E_i. Throws InsufficientDataError when
/// no window holds at least `min_levels` levels.
CoarseProfile coarse_grain(std::span<const double> profile, std::span<const double> energies,
                           double window_width, Index min_levels = 10);

struct FQuantities {
  Eigen::Matrix2cd f_bar = Eigen::Matrix2cd::Zero();  // F-bar_{alpha beta}
  Rdm rho_bar = Rdm::Zero();                          // rho-bar^S from the same average
  /// |W-bar^(1)_{alpha beta} + W-bar^(2)_{alpha beta}| per element.
  Eigen::Matrix2d balance_residual = Eigen::Matrix2d::Zero();
  std::vector<std::string> warnings;

  Complex f(int alpha, int beta) const { return f_bar(alpha - 1, beta - 1); }
};

/// Long-time averages F-bar_{alpha beta} = avg <E_alpha(t)|H^IE|E_beta(t)> and the
/// stationarity balance W-bar^(1) + W-bar^(2), with H^IS taken from `interaction`.
FQuantities f_lta(const EigenSystem& total, const InitialState& psi0,
                  const OperatorMatrix& obs_env, const QubitParams& qubit,
                  const InteractionSpec& interaction, double degeneracy_tol = kDegeneracyTol);

/// H^IS in the qubit energy basis (row/col 0 = alpha 1).
Eigen::Matrix2d system_operator_energy_basis(const InteractionSpec& interaction);

}  // namespace qcoh
