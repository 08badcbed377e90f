#pragma once

// Hamiltonians of a qubit coupled to a defect transverse-field Ising ring.
//
// Basis encoding: chain site l (1-based) is bit l-1 of the basis index, the
// qubit is the most significant bit. Bit value 0 means sigma^z = +1.
// Chain operators are full Pauli matrices; qubit operators S^z, S^x are
// spin-1/2 operators (Pauli / 2), so H^S = delta_s * S^z has levels
// -delta_s/2 (alpha = 1) and +delta_s/2 (alpha = 2).
//
// Every operator in this model is real, so matrices are stored as real
// symmetric Eigen matrices.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <string>
#include <vector>

namespace qcoh {

using Index = Eigen::Index;
using RealMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

enum class Axis { x, z };

std::string to_string(Axis axis);
Axis axis_from_string(const std::string& name);

struct Defect {
  int site = 1;           // 1-based chain site
  double strength = 0.0;  // longitudinal field d
};

struct ChainParams {
  int n_sites = 10;
  double h_x = 0.9;
  double j_z = 1.0;
  std::vector<Defect> defects;
  bool periodic = true;

  /// Chain with the two standard defects (1, 1.11) and (5, 0.6).
  /// Throws ConfigurationError for n_sites < 5.
  static ChainParams standard(int n_sites);

  void validate() const;
  Index dimension() const { return Index{1} << n_sites; }
};

struct QubitParams {
  double delta_s = 0.6;

  void validate() const;
  /// E^S_alpha for alpha in {1, 2}.
  double level(int alpha) const;
};

struct InteractionSpec {
  double lambda = 0.0;
  double f1 = 0.0;  // weight of S^z in H^IS
  double f2 = 1.0;  // weight of S^x in H^IS
  Axis env_axis = Axis::x;
  int k = 7;

  void validate(int n_sites) const;
  /// H^IS = lambda (f1 S^z + f2 S^x) in the computational qubit basis
  /// (row/col 0 = S^z +1/2).
  Eigen::Matrix2d system_operator() const;
};

struct OperatorMatrix {
  RealMatrix entries;
  std::string basis_label;

  Index dimension() const { return entries.rows(); }
  /// Largest elementwise |A_ij - A_ji|.
  double hermiticity_defect() const;
};

/// Sparse counterpart used above the dense assembly limit.
struct SparseOperator {
  SparseMatrix entries;
  std::string basis_label;

  Index dimension() const { return entries.rows(); }
};

/// Computational-basis row index of qubit level alpha (1 or 2).
constexpr Index qubit_bit(int alpha) { return alpha == 2 ? 0 : 1; }

OperatorMatrix build_local_pauli(int n_sites, int k, Axis axis);
OperatorMatrix build_env_hamiltonian(const ChainParams& p);
OperatorMatrix build_total_hamiltonian(const QubitParams& q, const ChainParams& p,
                                       const InteractionSpec& i);

SparseOperator build_env_hamiltonian_sparse(const ChainParams& p);
SparseOperator build_total_hamiltonian_sparse(const QubitParams& q, const ChainParams& p,
                                              const InteractionSpec& i);

/// Embeds a chain operator as 1 (x) A on the qubit+chain space.
OperatorMatrix embed_chain_operator(const OperatorMatrix& chain_op);
/// Embeds a 2x2 qubit operator as Q (x) 1 on the qubit+chain space.
OperatorMatrix embed_qubit_operator(const Eigen::Matrix2d& qubit_op, int n_sites);

/// Frobenius norm of [A, B].
double commutator_norm(const OperatorMatrix& a, const OperatorMatrix& b);

}  // namespace qcoh
