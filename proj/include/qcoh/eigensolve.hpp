#pragma once

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "qcoh/spin_lattice.hpp"

namespace qcoh {

/// Closed energy interval [lo, hi].
struct SpectralWindow {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  static SpectralWindow around(double center, double half_width);
  static SpectralWindow everything() { return {}; }

  bool contains(double e) const { return e >= lo && e <= hi; }
};

/// Eigenpairs sorted by ascending energy. Column n of `vectors` is |n>.
struct EigenSystem {
  Eigen::VectorXd energies;
  RealMatrix vectors;
  double residual_max = 0.0;
  std::optional<SpectralWindow> window;  // set when only part of the spectrum is held

  Index size() const { return energies.size(); }
  Index dimension() const { return vectors.rows(); }
  bool empty() const { return energies.size() == 0; }
  bool complete() const { return !window && size() == dimension(); }
};

struct SolverSettings {
  Index dense_limit = Index{1} << 13;
  bool compute_residuals = true;
  /// Relative tolerance on the max elementwise asymmetry accepted as Hermitian.
  double hermitian_tol = 1e-12;
};

/// Complete eigendecomposition of a real symmetric operator (LAPACK dsyevd).
/// Eigenvector signs are fixed so the largest-magnitude component is positive.
EigenSystem full_diagonalize(const OperatorMatrix& h, const SolverSettings& settings = {});

/// Eigenpairs with energy inside `w`, order and residuals preserved.
EigenSystem window_select(const EigenSystem& es, const SpectralWindow& w);

/// The `count` eigenpairs closest to `center`, returned in ascending order.
EigenSystem window_select_nearest(const EigenSystem& es, double center, Index count);

struct InteriorSettings {
  Index max_krylov = 0;        // 0: pick from the requested count
  int max_restarts = 6;
  double residual_tol = 1e-9;
  std::uint64_t seed = 7;
};

/// Eigenpairs nearest `center` of a sparse operator by shift-invert Lanczos
/// with full reorthogonalization. Intended for dimensions above the dense limit.
EigenSystem interior_eigenpairs(const SparseOperator& h, double center, Index count,
                                const InteriorSettings& settings = {});

struct DegeneracyReport {
  /// Index pairs (n, n+1) of levels closer than the tolerance.
  std::vector<std::pair<Index, Index>> degenerate_levels;
  /// Pairs of nearest-neighbour gaps (identified by their lower level index)
  /// whose widths agree within the tolerance.
  std::vector<std::pair<Index, Index>> degenerate_gaps;

  bool empty() const { return degenerate_levels.empty() && degenerate_gaps.empty(); }
};

DegeneracyReport degeneracy_check(const EigenSystem& es, double tol = 1e-10);

/// Max over columns of ||H v - E v||.
double max_residual(const RealMatrix& h, const Eigen::VectorXd& energies,
                    const RealMatrix& vectors);

/// Groups consecutive levels whose spacing is below `tol`. Returns [begin, end) ranges.
std::vector<std::pair<Index, Index>> degenerate_clusters(const Eigen::VectorXd& energies,
                                                         double tol);

}  // namespace qcoh
