#include "qcoh/spectral_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "qcoh/error.hpp"

namespace qcoh {

namespace {

std::vector<Index> shell_members(const EigenSystem& es, const SpectralWindow& shell) {
  std::vector<Index> idx;
  for (Index n = 0; n < es.size(); ++n) {
    if (shell.contains(es.energies(n))) idx.push_back(n);
  }
  return idx;
}

RealMatrix shell_vectors(const EigenSystem& es, const std::vector<Index>& idx) {
  RealMatrix v(es.dimension(), static_cast<Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) v.col(static_cast<Index>(c)) = es.vectors.col(idx[c]);
  return v;
}

void require_levels(std::size_t have, Index need, const char* what) {
  if (have == 0 || static_cast<Index>(have) < need) {
    throw InsufficientDataError(std::string(what) + ": shell holds " + std::to_string(have) +
                                " levels, need " + std::to_string(std::max<Index>(need, 1)));
  }
}

}  // namespace

UnfoldedSpectrum unfold_spectrum(std::span<const double> energies, const UnfoldSpec& spec) {
  const std::size_t n = energies.size();
  if (n < spec.min_levels) {
    throw InsufficientDataError("unfolding needs at least " + std::to_string(spec.min_levels) +
                                " levels, got " + std::to_string(n));
  }
  if (!std::is_sorted(energies.begin(), energies.end())) {
    throw ContractViolation("unfold_spectrum expects ascending energies");
  }
  const double lo = energies.front();
  const double hi = energies.back();
  const double mid = 0.5 * (lo + hi);
  const double half = std::max(0.5 * (hi - lo), 1e-300);
  const int top = std::max(1, std::min<int>(spec.degree, static_cast<int>(n) - 2));

  Eigen::VectorXd staircase(static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i) staircase(static_cast<Index>(i)) = static_cast<double>(i) + 0.5;
  Eigen::VectorXd fitted;
  // Lower the degree until the fitted staircase is non-decreasing.
  for (int degree = top; degree >= 1; --degree) {
    RealMatrix basis(static_cast<Index>(n), degree + 1);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = (energies[i] - mid) / half;
      double p = 1.0;
      for (int d = 0; d <= degree; ++d) {
        basis(static_cast<Index>(i), d) = p;
        p *= x;
      }
    }
    fitted = basis * basis.colPivHouseholderQr().solve(staircase);
    bool monotone = true;
    for (Index i = 1; i < fitted.size() && monotone; ++i) monotone = fitted(i) >= fitted(i - 1);
    if (monotone) break;
  }
  // Rescale so the unfolded levels span n - 1 mean spacings.
  const double span = fitted(static_cast<Index>(n) - 1) - fitted(0);
  if (span > 0.0) fitted = (fitted.array() - fitted(0)) * (static_cast<double>(n - 1) / span) + 0.5;

  UnfoldedSpectrum out;
  out.levels.assign(fitted.data(), fitted.data() + n);
  out.spacings.resize(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) out.spacings[i] = out.levels[i + 1] - out.levels[i];
  return out;
}

std::vector<double> middle_fraction(std::span<const double> energies, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigurationError("fraction must be in (0, 1]");
  const std::size_t n = energies.size();
  const auto drop = static_cast<std::size_t>(std::floor(0.5 * (1.0 - fraction) * n));
  return {energies.begin() + static_cast<std::ptrdiff_t>(drop),
          energies.end() - static_cast<std::ptrdiff_t>(drop)};
}

double wigner_dyson_pdf(double s) {
  using std::numbers::pi;
  return s <= 0.0 ? 0.0 : 0.5 * pi * s * std::exp(-0.25 * pi * s * s);
}

double wigner_dyson_cdf(double s) {
  return s <= 0.0 ? 0.0 : 1.0 - std::exp(-0.25 * std::numbers::pi * s * s);
}

double poisson_cdf(double s) { return s <= 0.0 ? 0.0 : 1.0 - std::exp(-s); }

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double ks_distance(std::span<const double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) return 1.0;
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

SpacingStats spacing_distribution(std::span<const double> spacings) {
  SpacingStats st;
  st.unfolded_spacings.assign(spacings.begin(), spacings.end());
  if (spacings.empty()) return st;
  st.mean = std::accumulate(spacings.begin(), spacings.end(), 0.0) / static_cast<double>(spacings.size());
  st.ks_wigner = ks_distance(spacings, wigner_dyson_cdf);
  st.ks_poisson = ks_distance(spacings, poisson_cdf);
  return st;
}

RealMatrix eigenbasis_elements(const EigenSystem& es, const OperatorMatrix& obs) {
  if (obs.dimension() != es.dimension()) throw ConfigurationError("observable dimension mismatch");
  return es.vectors.transpose() * (obs.entries * es.vectors);
}

EthStats eth_diagonal_stats(const EigenSystem& es, const OperatorMatrix& obs,
                            const SpectralWindow& shell, Index min_levels) {
  if (obs.dimension() != es.dimension()) throw ConfigurationError("observable dimension mismatch");
  const auto idx = shell_members(es, shell);
  require_levels(idx.size(), min_levels, "eth_diagonal_stats");
  const RealMatrix v = shell_vectors(es, idx);
  const Eigen::VectorXd diag = (v.cwiseProduct(obs.entries * v)).colwise().sum().transpose();

  EthStats st;
  st.observable_label = obs.basis_label;
  st.shell = shell;
  st.level_count = static_cast<Index>(idx.size());
  st.mu = diag.mean();
  st.sigma_d = std::sqrt((diag.array() - st.mu).square().mean());
  return st;
}

EthStats eth_offdiag_stats(const EigenSystem& es, const OperatorMatrix& obs,
                           const SpectralWindow& shell, Index min_levels) {
  if (obs.dimension() != es.dimension()) throw ConfigurationError("observable dimension mismatch");
  const auto idx = shell_members(es, shell);
  require_levels(idx.size(), std::max<Index>(min_levels, 2), "eth_offdiag_stats");
  const RealMatrix v = shell_vectors(es, idx);
  const RealMatrix elems = v.transpose() * (obs.entries * v);
  const Index n = elems.rows();

  EthStats st;
  st.observable_label = obs.basis_label;
  st.shell = shell;
  st.level_count = n;
  double sum_sq = 0.0;
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      if (i != j) sum_sq += elems(i, j) * elems(i, j);
    }
  }
  st.sigma_nd = std::sqrt(sum_sq / (static_cast<double>(n) * static_cast<double>(n - 1)));
  if (st.sigma_nd > 0.0) {
    st.offdiag_samples.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < j; ++i) st.offdiag_samples.push_back(elems(i, j) / st.sigma_nd);
    }
    st.ks_gauss = ks_distance(st.offdiag_samples, standard_normal_cdf);
  }
  return st;
}

bool SmoothCurve::covers(double e) const {
  return !support.empty() && e >= support.front() && e <= support.back();
}

double SmoothCurve::operator()(double e) const {
  if (!covers(e)) {
    throw ExtrapolationError("energy " + std::to_string(e) + " outside curve support [" +
                             (support.empty() ? std::string("empty")
                                              : std::to_string(support.front()) + ", " +
                                                    std::to_string(support.back())) +
                             "]");
  }
  if (support.size() == 1) return values.front();
  auto it = std::upper_bound(support.begin(), support.end(), e);
  if (it == support.end()) return values.back();
  const auto hi = static_cast<std::size_t>(it - support.begin());
  const std::size_t lo = hi - 1;
  const double t = (e - support[lo]) / (support[hi] - support[lo]);
  return (1.0 - t) * values[lo] + t * values[hi];
}

SmoothCurve sliding_average(std::span<const double> energies, std::span<const double> values,
                            double window_width, Index min_span_levels) {
  if (energies.size() != values.size()) throw ConfigurationError("energies/values size mismatch");
  if (!(window_width > 0.0)) throw ConfigurationError("window_width must be positive");
  const std::size_t n = energies.size();
  if (n < 30) {
    throw InsufficientDataError("sliding average needs at least 30 levels, got " + std::to_string(n));
  }
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + values[i];
  const auto span_levels = static_cast<std::size_t>(std::min<Index>(min_span_levels, static_cast<Index>(n)));

  SmoothCurve curve;
  curve.window_width = window_width;
  const double step = 0.25 * window_width;
  const double first = energies.front();
  const double last = energies.back();
  const auto points = static_cast<std::size_t>(std::floor((last - first) / step)) + 1;
  for (std::size_t p = 0; p <= points; ++p) {
    const double g = std::min(first + step * static_cast<double>(p), last);
    if (!curve.support.empty() && g <= curve.support.back()) break;
    auto lo = static_cast<std::size_t>(
        std::lower_bound(energies.begin(), energies.end(), g - 0.5 * window_width) - energies.begin());
    auto hi = static_cast<std::size_t>(
        std::upper_bound(energies.begin(), energies.end(), g + 0.5 * window_width) - energies.begin());
    if (hi - lo < span_levels) {
      // Grow towards the nearer neighbour until the window holds span_levels levels.
      lo = hi = static_cast<std::size_t>(
          std::lower_bound(energies.begin(), energies.end(), g) - energies.begin());
      while (hi - lo < span_levels) {
        const bool can_left = lo > 0;
        const bool can_right = hi < n;
        if (can_left && (!can_right || g - energies[lo - 1] <= energies[hi] - g)) {
          --lo;
        } else {
          ++hi;
        }
      }
    }
    curve.support.push_back(g);
    curve.values.push_back((prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo));
  }
  return curve;
}

SmoothCurve smooth_h_of_E(const EigenSystem& es, const OperatorMatrix& obs, double window_width) {
  if (obs.dimension() != es.dimension()) throw ConfigurationError("observable dimension mismatch");
  const Eigen::VectorXd diag =
      (es.vectors.cwiseProduct(obs.entries * es.vectors)).colwise().sum().transpose();
  return sliding_average({es.energies.data(), static_cast<std::size_t>(es.size())},
                         {diag.data(), static_cast<std::size_t>(diag.size())}, window_width);
}

}  // namespace qcoh
