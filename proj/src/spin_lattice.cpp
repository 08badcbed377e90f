#include "qcoh/spin_lattice.hpp"

#include <algorithm>
#include <set>

#include "qcoh/error.hpp"

namespace qcoh {

namespace {

// sigma^z eigenvalue of 1-based chain site `site` in basis state `b`.
inline double z_value(Index b, int site) {
  return ((b >> (site - 1)) & 1) ? -1.0 : 1.0;
}

// S^z eigenvalue of the qubit in computational row q.
inline double qubit_sz(Index q) { return q == 0 ? 0.5 : -0.5; }

// Calls emit(row, col, value) for every nonzero term of H^E.
// Duplicated (row, col) pairs are summed by the caller.
template <typename Emit>
void emit_env_terms(const ChainParams& p, Index offset, Emit&& emit) {
  const Index dim = p.dimension();
  const int n = p.n_sites;
  for (Index b = 0; b < dim; ++b) {
    double diag = 0.0;
    for (const auto& d : p.defects) diag += d.strength * z_value(b, d.site);
    const int bonds = p.periodic ? n : n - 1;
    for (int l = 1; l <= bonds; ++l) {
      const int next = l == n ? 1 : l + 1;
      diag += p.j_z * z_value(b, l) * z_value(b, next);
    }
    if (diag != 0.0) emit(offset + b, offset + b, diag);
    if (p.h_x != 0.0) {
      for (int l = 0; l < n; ++l) emit(offset + (b ^ (Index{1} << l)), offset + b, p.h_x);
    }
  }
}

template <typename Emit>
void emit_total_terms(const QubitParams& q, const ChainParams& p, const InteractionSpec& in,
                      Emit&& emit) {
  const Index env_dim = p.dimension();
  const Index flip = Index{1} << (in.k - 1);
  for (Index qb = 0; qb < 2; ++qb) {
    const Index offset = qb * env_dim;
    emit_env_terms(p, offset, emit);
    for (Index b = 0; b < env_dim; ++b) {
      const Index row = offset + b;
      emit(row, row, q.delta_s * qubit_sz(qb));
      if (in.lambda == 0.0) continue;
      // lambda f1 S^z (x) sigma_k
      if (in.f1 != 0.0) {
        const double amp = in.lambda * in.f1 * qubit_sz(qb);
        if (in.env_axis == Axis::z) {
          emit(row, row, amp * z_value(b, in.k));
        } else {
          emit(offset + (b ^ flip), row, amp);
        }
      }
      // lambda f2 S^x (x) sigma_k ; S^x flips the qubit with amplitude 1/2
      if (in.f2 != 0.0) {
        const double amp = 0.5 * in.lambda * in.f2;
        const Index other = (1 - qb) * env_dim;
        if (in.env_axis == Axis::z) {
          emit(other + b, row, amp * z_value(b, in.k));
        } else {
          emit(other + (b ^ flip), row, amp);
        }
      }
    }
  }
}

void check_site(int n_sites, int k) {
  if (k < 1 || k > n_sites) {
    throw InvalidSiteError("site " + std::to_string(k) + " outside [1, " +
                           std::to_string(n_sites) + "]");
  }
}

constexpr int kMaxSites = 24;

std::string chain_label(int n) {
  return "chain: " + std::to_string(n) + " sites, site l = bit l-1, bit 0 = sigma^z +1";
}

std::string total_label(int n) {
  return "qubit (x) chain: qubit = bit " + std::to_string(n) + ", bit 0 = S^z +1/2; " +
         chain_label(n);
}

SparseMatrix from_triplets(Index dim, std::vector<Eigen::Triplet<double>>& triplets) {
  SparseMatrix m(dim, dim);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.prune(0.0);
  return m;
}

}  // namespace

std::string to_string(Axis axis) { return axis == Axis::x ? "x" : "z"; }

Axis axis_from_string(const std::string& name) {
  if (name == "x" || name == "X") return Axis::x;
  if (name == "z" || name == "Z") return Axis::z;
  throw ConfigurationError("unknown axis '" + name + "' (expected x or z)");
}

ChainParams ChainParams::standard(int n_sites) {
  if (n_sites < 5) {
    throw ConfigurationError("standard defects need n_sites >= 5, got " +
                             std::to_string(n_sites));
  }
  ChainParams p;
  p.n_sites = n_sites;
  p.defects = {{1, 1.11}, {5, 0.6}};
  return p;
}

void ChainParams::validate() const {
  if (n_sites < 2 || n_sites > kMaxSites) {
    throw ConfigurationError("n_sites must lie in [2, " + std::to_string(kMaxSites) +
                             "], got " + std::to_string(n_sites));
  }
  std::set<int> seen;
  for (const auto& d : defects) {
    check_site(n_sites, d.site);
    if (!seen.insert(d.site).second) {
      throw InvalidSiteError("duplicate defect site " + std::to_string(d.site));
    }
  }
}

void QubitParams::validate() const {
  if (!(delta_s > 0.0)) throw ConfigurationError("delta_s must be positive");
}

double QubitParams::level(int alpha) const {
  if (alpha != 1 && alpha != 2) throw ConfigurationError("qubit level must be 1 or 2");
  return alpha == 1 ? -0.5 * delta_s : 0.5 * delta_s;
}

void InteractionSpec::validate(int n_sites) const {
  check_site(n_sites, k);
  if (lambda != 0.0 && f1 == 0.0 && f2 == 0.0) {
    throw ConfigurationError("interaction with lambda != 0 needs (f1, f2) != (0, 0)");
  }
}

Eigen::Matrix2d InteractionSpec::system_operator() const {
  Eigen::Matrix2d sz{{0.5, 0.0}, {0.0, -0.5}};
  Eigen::Matrix2d sx{{0.0, 0.5}, {0.5, 0.0}};
  return lambda * (f1 * sz + f2 * sx);
}

double OperatorMatrix::hermiticity_defect() const {
  return (entries - entries.transpose()).cwiseAbs().maxCoeff();
}

OperatorMatrix build_local_pauli(int n_sites, int k, Axis axis) {
  if (n_sites < 1 || n_sites > kMaxSites) throw ConfigurationError("bad n_sites");
  check_site(n_sites, k);
  const Index dim = Index{1} << n_sites;
  OperatorMatrix op{RealMatrix::Zero(dim, dim), chain_label(n_sites)};
  const Index flip = Index{1} << (k - 1);
  for (Index b = 0; b < dim; ++b) {
    if (axis == Axis::z) {
      op.entries(b, b) = z_value(b, k);
    } else {
      op.entries(b ^ flip, b) = 1.0;
    }
  }
  return op;
}

OperatorMatrix build_env_hamiltonian(const ChainParams& p) {
  p.validate();
  const Index dim = p.dimension();
  OperatorMatrix h{RealMatrix::Zero(dim, dim), chain_label(p.n_sites)};
  emit_env_terms(p, 0, [&](Index r, Index c, double v) { h.entries(r, c) += v; });
  return h;
}

OperatorMatrix build_total_hamiltonian(const QubitParams& q, const ChainParams& p,
                                       const InteractionSpec& i) {
  q.validate();
  p.validate();
  if (i.k < 1 || i.k > p.n_sites) {
    throw ConfigurationError("interaction site " + std::to_string(i.k) +
                             " inconsistent with chain of " + std::to_string(p.n_sites) +
                             " sites");
  }
  i.validate(p.n_sites);
  const Index dim = 2 * p.dimension();
  OperatorMatrix h{RealMatrix::Zero(dim, dim), total_label(p.n_sites)};
  emit_total_terms(q, p, i, [&](Index r, Index c, double v) { h.entries(r, c) += v; });
  return h;
}

SparseOperator build_env_hamiltonian_sparse(const ChainParams& p) {
  p.validate();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(p.dimension()) * (p.n_sites + 1));
  emit_env_terms(p, 0, [&](Index r, Index c, double v) { t.emplace_back(r, c, v); });
  return {from_triplets(p.dimension(), t), chain_label(p.n_sites)};
}

SparseOperator build_total_hamiltonian_sparse(const QubitParams& q, const ChainParams& p,
                                              const InteractionSpec& i) {
  q.validate();
  p.validate();
  if (i.k < 1 || i.k > p.n_sites) {
    throw ConfigurationError("interaction site inconsistent with chain length");
  }
  i.validate(p.n_sites);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(2 * p.dimension()) * (p.n_sites + 4));
  emit_total_terms(q, p, i, [&](Index r, Index c, double v) { t.emplace_back(r, c, v); });
  return {from_triplets(2 * p.dimension(), t), total_label(p.n_sites)};
}

OperatorMatrix embed_chain_operator(const OperatorMatrix& chain_op) {
  const Index d = chain_op.dimension();
  OperatorMatrix out{RealMatrix::Zero(2 * d, 2 * d), "1 (x) " + chain_op.basis_label};
  out.entries.topLeftCorner(d, d) = chain_op.entries;
  out.entries.bottomRightCorner(d, d) = chain_op.entries;
  return out;
}

OperatorMatrix embed_qubit_operator(const Eigen::Matrix2d& qubit_op, int n_sites) {
  const Index d = Index{1} << n_sites;
  OperatorMatrix out{RealMatrix::Zero(2 * d, 2 * d), total_label(n_sites)};
  for (Index a = 0; a < 2; ++a) {
    for (Index b = 0; b < 2; ++b) {
      if (qubit_op(a, b) == 0.0) continue;
      out.entries.block(a * d, b * d, d, d).diagonal().setConstant(qubit_op(a, b));
    }
  }
  return out;
}

double commutator_norm(const OperatorMatrix& a, const OperatorMatrix& b) {
  if (a.dimension() != b.dimension()) throw ConfigurationError("dimension mismatch");
  return (a.entries * b.entries - b.entries * a.entries).norm();
}

}  // namespace qcoh
