#include "qcoh/eigensolve.hpp"

#include <lapacke.h>

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>

#include "qcoh/error.hpp"

namespace qcoh {

namespace {

// Accepted ||H v - E v|| relative to max |H_ij| before distrusting LAPACK.
constexpr double kResidualCeiling = 1e-10;

void fix_signs(RealMatrix& vectors) {
  for (Index n = 0; n < vectors.cols(); ++n) {
    Index arg = 0;
    vectors.col(n).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, n) < 0.0) vectors.col(n) = -vectors.col(n);
  }
}

EigenSystem take_columns(const EigenSystem& es, const std::vector<Index>& cols) {
  EigenSystem out;
  out.energies.resize(static_cast<Index>(cols.size()));
  out.vectors.resize(es.dimension(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    out.energies(static_cast<Index>(c)) = es.energies(cols[c]);
    out.vectors.col(static_cast<Index>(c)) = es.vectors.col(cols[c]);
  }
  out.residual_max = es.residual_max;
  return out;
}

}  // namespace

SpectralWindow SpectralWindow::around(double center, double half_width) {
  if (!(half_width > 0.0)) throw ConfigurationError("window half_width must be positive");
  return {center - half_width, center + half_width};
}

double max_residual(const RealMatrix& h, const Eigen::VectorXd& energies,
                    const RealMatrix& vectors) {
  if (vectors.cols() == 0) return 0.0;
  RealMatrix r = h * vectors;
  r -= vectors * energies.asDiagonal();
  return r.colwise().norm().maxCoeff();
}

EigenSystem full_diagonalize(const OperatorMatrix& h, const SolverSettings& settings) {
  const Index dim = h.dimension();
  if (dim != h.entries.cols()) throw ContractViolation("operator matrix is not square");
  if (dim > settings.dense_limit) {
    throw CapacityError("dimension " + std::to_string(dim) + " exceeds dense limit " +
                        std::to_string(settings.dense_limit) +
                        "; use the interior-window solver and window_select");
  }
  EigenSystem es;
  if (dim == 0) return es;
  const double scale = std::max(1.0, h.entries.cwiseAbs().maxCoeff());
  if (h.hermiticity_defect() > settings.hermitian_tol * scale) {
    throw ContractViolation("operator is not Hermitian");
  }

  es.vectors = h.entries;
  es.energies.resize(dim);
  const lapack_int info =
      LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', static_cast<lapack_int>(dim),
                     es.vectors.data(), static_cast<lapack_int>(dim), es.energies.data());
  if (info != 0) {
    throw Error("LAPACKE_dsyevd failed with info = " + std::to_string(info));
  }
  es.residual_max = max_residual(h.entries, es.energies, es.vectors);
  if (!(es.residual_max < kResidualCeiling * scale)) {
    // Some OpenBLAS builds pick miscompiled kernels on newer CPUs and return
    // wrong eigenvectors (OPENBLAS_CORETYPE=Haswell avoids it). Eigen's solver
    // does not go through BLAS.
    std::fprintf(stderr,
                 "qcoh: LAPACK eigenvectors failed the residual check (%.3g); "
                 "falling back to Eigen. Set OPENBLAS_CORETYPE to a supported core.\n",
                 es.residual_max);
    Eigen::SelfAdjointEigenSolver<RealMatrix> solver(h.entries);
    if (solver.info() != Eigen::Success) throw Error("Eigen eigensolver failed");
    es.energies = solver.eigenvalues();
    es.vectors = solver.eigenvectors();
    es.residual_max = max_residual(h.entries, es.energies, es.vectors);
  }
  fix_signs(es.vectors);
  if (!settings.compute_residuals) es.residual_max = 0.0;
  return es;
}

EigenSystem window_select(const EigenSystem& es, const SpectralWindow& w) {
  const double* begin = es.energies.data();
  const double* end = begin + es.size();
  const auto lo = std::lower_bound(begin, end, w.lo);
  const auto hi = std::upper_bound(begin, end, w.hi);
  EigenSystem out;
  const Index first = lo - begin;
  const Index count = std::max<Index>(0, hi - lo);
  out.energies = es.energies.segment(first, count);
  out.vectors = es.vectors.middleCols(first, count);
  out.residual_max = es.residual_max;
  const bool whole = !es.window && first == 0 && count == es.size() &&
                     std::isinf(w.lo) && std::isinf(w.hi);
  if (!whole) {
    SpectralWindow merged = w;
    if (es.window) {
      merged.lo = std::max(merged.lo, es.window->lo);
      merged.hi = std::min(merged.hi, es.window->hi);
    }
    out.window = merged;
  }
  return out;
}

EigenSystem window_select_nearest(const EigenSystem& es, double center, Index count) {
  count = std::min(count, es.size());
  std::vector<Index> order(static_cast<std::size_t>(es.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return std::abs(es.energies(a) - center) < std::abs(es.energies(b) - center);
  });
  order.resize(static_cast<std::size_t>(count));
  std::sort(order.begin(), order.end());
  EigenSystem out = take_columns(es, order);
  if (count > 0) out.window = SpectralWindow{out.energies(0), out.energies(count - 1)};
  return out;
}

std::vector<std::pair<Index, Index>> degenerate_clusters(const Eigen::VectorXd& energies,
                                                         double tol) {
  std::vector<std::pair<Index, Index>> clusters;
  Index start = 0;
  for (Index n = 1; n <= energies.size(); ++n) {
    if (n == energies.size() || energies(n) - energies(n - 1) >= tol) {
      clusters.emplace_back(start, n);
      start = n;
    }
  }
  return clusters;
}

DegeneracyReport degeneracy_check(const EigenSystem& es, double tol) {
  DegeneracyReport report;
  const Index n = es.size();
  for (Index i = 0; i + 1 < n; ++i) {
    if (es.energies(i + 1) - es.energies(i) < tol) report.degenerate_levels.emplace_back(i, i + 1);
  }
  // Equal gaps: sort the nearest-neighbour gaps and compare neighbours in that order.
  std::vector<std::pair<double, Index>> gaps;
  gaps.reserve(static_cast<std::size_t>(std::max<Index>(0, n - 1)));
  for (Index i = 0; i + 1 < n; ++i) gaps.emplace_back(es.energies(i + 1) - es.energies(i), i);
  std::sort(gaps.begin(), gaps.end());
  for (std::size_t g = 1; g < gaps.size(); ++g) {
    if (gaps[g].first - gaps[g - 1].first < tol) {
      report.degenerate_gaps.emplace_back(std::min(gaps[g - 1].second, gaps[g].second),
                                          std::max(gaps[g - 1].second, gaps[g].second));
    }
  }
  return report;
}

EigenSystem interior_eigenpairs(const SparseOperator& h, double center, Index count,
                                const InteriorSettings& settings) {
  const Index dim = h.dimension();
  if (count <= 0) throw ConfigurationError("interior solver needs a positive count");
  count = std::min(count, dim);

  SparseMatrix shifted = h.entries;
  SparseMatrix eye(dim, dim);
  eye.setIdentity();
  shifted -= center * eye;
  shifted.makeCompressed();
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(shifted);
  if (lu.info() != Eigen::Success) {
    throw NearSingularityError("shift coincides with an eigenvalue; move the window center");
  }

  std::mt19937_64 rng(settings.seed);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd start(dim);
  for (Index i = 0; i < dim; ++i) start(i) = gauss(rng);

  Index krylov = settings.max_krylov > 0 ? settings.max_krylov : 2 * count + 40;
  for (int attempt = 0; attempt <= settings.max_restarts; ++attempt) {
    krylov = std::min(krylov, dim);
    RealMatrix q(dim, krylov);
    Eigen::VectorXd alpha(krylov), beta(krylov);
    q.col(0) = start.normalized();
    Index steps = krylov;
    for (Index j = 0; j < krylov; ++j) {
      Eigen::VectorXd w = lu.solve(q.col(j));
      alpha(j) = q.col(j).dot(w);
      // Two passes of classical Gram-Schmidt against the whole basis.
      for (int pass = 0; pass < 2; ++pass) {
        w -= q.leftCols(j + 1) * (q.leftCols(j + 1).transpose() * w);
      }
      beta(j) = w.norm();
      if (j + 1 == krylov) break;
      if (beta(j) < 1e-12) {
        steps = j + 1;
        break;
      }
      q.col(j + 1) = w / beta(j);
    }

    RealMatrix t = RealMatrix::Zero(steps, steps);
    for (Index j = 0; j < steps; ++j) {
      t(j, j) = alpha(j);
      if (j + 1 < steps) t(j, j + 1) = t(j + 1, j) = beta(j);
    }
    Eigen::SelfAdjointEigenSolver<RealMatrix> ritz(t);
    std::vector<Index> order(static_cast<std::size_t>(steps));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
      return std::abs(ritz.eigenvalues()(a)) > std::abs(ritz.eigenvalues()(b));
    });
    const Index keep = std::min(count, steps);
    order.resize(static_cast<std::size_t>(keep));

    EigenSystem es;
    es.energies.resize(keep);
    es.vectors.resize(dim, keep);
    for (Index c = 0; c < keep; ++c) {
      const Index r = order[static_cast<std::size_t>(c)];
      es.energies(c) = center + 1.0 / ritz.eigenvalues()(r);
      es.vectors.col(c) = (q.leftCols(steps) * ritz.eigenvectors().col(r)).normalized();
    }
    std::vector<Index> asc(static_cast<std::size_t>(keep));
    std::iota(asc.begin(), asc.end(), Index{0});
    std::sort(asc.begin(), asc.end(), [&](Index a, Index b) { return es.energies(a) < es.energies(b); });
    es = take_columns(es, asc);
    fix_signs(es.vectors);

    RealMatrix r = h.entries * es.vectors;
    r -= es.vectors * es.energies.asDiagonal();
    es.residual_max = keep > 0 ? r.colwise().norm().maxCoeff() : 0.0;
    if (keep > 0) es.window = SpectralWindow{es.energies(0), es.energies(keep - 1)};
    if (es.residual_max < settings.residual_tol || krylov == dim) return es;

    // Not converged: restart from the sum of the wanted Ritz vectors with a larger basis.
    start = es.vectors.rowwise().sum();
    krylov = krylov + krylov / 2;
  }
  throw Error("interior eigensolver did not converge; raise max_krylov or max_restarts");
}

}  // namespace qcoh
