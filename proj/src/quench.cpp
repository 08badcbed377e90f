#include "qcoh/quench.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "qcoh/error.hpp"

namespace qcoh {

namespace {

// Chain dimension for a total eigensystem (qubit is the top bit).
Index env_dimension(const EigenSystem& total) {
  const Index d = total.dimension();
  if (d < 2 || d % 2 != 0) throw ConfigurationError("total eigensystem has odd dimension");
  return d / 2;
}

// Block of total eigenvectors carrying qubit level alpha: rows = chain basis.
auto level_block(const EigenSystem& total, int alpha) {
  const Index de = env_dimension(total);
  return total.vectors.middleRows(qubit_bit(alpha) * de, de);
}

Eigen::VectorXcd overlaps(const EigenSystem& total, const Eigen::VectorXcd& psi) {
  if (psi.size() != total.dimension()) throw ConfigurationError("state dimension mismatch");
  Eigen::VectorXcd o(total.size());
  o.real() = total.vectors.transpose() * psi.real();
  o.imag() = total.vectors.transpose() * psi.imag();
  return o;
}

std::string degeneracy_warning(std::size_t clusters) {
  return "degenerate spectrum: " + std::to_string(clusters) +
         " level clusters averaged as subspaces; nondegeneracy assumption violated";
}

}  // namespace

EnergyShell EnergyShell::build(const EigenSystem& env, double center, double width) {
  if (!(width > 0.0)) throw ConfigurationError("shell width must be positive");
  EnergyShell shell{center, width, {}};
  const double lo = center - 0.5 * width;
  const double hi = center + 0.5 * width;
  for (Index i = 0; i < env.size(); ++i) {
    if (env.energies(i) >= lo && env.energies(i) <= hi) shell.members.push_back(i);
  }
  return shell;
}

void QubitState::validate() const {
  if (std::abs(std::norm(c1) + std::norm(c2) - 1.0) > 1e-12) {
    throw ConfigurationError("qubit amplitudes must satisfy |c1|^2 + |c2|^2 = 1");
  }
}

InitialState sample_shell_state(const EigenSystem& env, const EnergyShell& shell,
                                const QubitState& c, std::uint64_t seed) {
  c.validate();
  if (shell.count() == 0) throw InsufficientDataError("energy shell holds no levels");
  InitialState s;
  s.qubit = c;
  s.shell = shell;
  s.seed = seed;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
  s.shell_coefficients.resize(shell.count());
  for (Index j = 0; j < shell.count(); ++j) s.shell_coefficients(j) = Complex(gauss(rng), gauss(rng));

  const Eigen::VectorXcd amps = s.shell_coefficients / s.shell_coefficients.norm();
  s.environment = Eigen::VectorXcd::Zero(env.dimension());
  for (Index j = 0; j < shell.count(); ++j) {
    s.environment += amps(j) * env.vectors.col(shell.members[static_cast<std::size_t>(j)]).cast<Complex>();
  }
  s.environment.normalize();

  const Index de = env.dimension();
  s.total = Eigen::VectorXcd::Zero(2 * de);
  for (int alpha : {1, 2}) {
    s.total.segment(qubit_bit(alpha) * de, de) = c.amplitude(alpha) * s.environment;
  }
  return s;
}

RdmAverage lta_rdm(const EigenSystem& total, const InitialState& psi0, double degeneracy_tol) {
  const Eigen::VectorXcd o = overlaps(total, psi0.total);
  const auto u1 = level_block(total, 1);
  const auto u2 = level_block(total, 2);

  RdmAverage out;
  out.method = AverageMethod::spectral;
  const auto clusters = degenerate_clusters(total.energies, degeneracy_tol);
  std::size_t degenerate = 0;
  for (const auto& [begin, end] : clusters) {
    if (end - begin == 1) {
      const Index n = begin;
      const double p = std::norm(o(n));
      out.matrix(0, 0) += p * u1.col(n).squaredNorm();
      out.matrix(1, 1) += p * u2.col(n).squaredNorm();
      out.matrix(0, 1) += p * u1.col(n).dot(u2.col(n));
      continue;
    }
    ++degenerate;
    for (Index n = begin; n < end; ++n) {
      for (Index m = begin; m < end; ++m) {
        const Complex w = o(n) * std::conj(o(m));
        out.matrix(0, 0) += w * u1.col(n).dot(u1.col(m));
        out.matrix(1, 1) += w * u2.col(n).dot(u2.col(m));
        out.matrix(0, 1) += w * u1.col(n).dot(u2.col(m));
      }
    }
  }
  out.matrix(1, 0) = std::conj(out.matrix(0, 1));
  if (degenerate > 0) out.warnings.push_back(degeneracy_warning(degenerate));
  return out;
}

RdmAverage average_realizations(const std::vector<RdmAverage>& runs) {
  if (runs.empty()) throw InsufficientDataError("no realizations to average");
  RdmAverage out;
  out.method = runs.front().method;
  out.realization_count = 0;
  for (const auto& r : runs) {
    out.matrix += r.matrix * static_cast<double>(r.realization_count);
    out.realization_count += r.realization_count;
    out.warnings.insert(out.warnings.end(), r.warnings.begin(), r.warnings.end());
  }
  out.matrix /= static_cast<double>(out.realization_count);
  return out;
}

std::vector<Rdm> evolve_rdm(const EigenSystem& total, const InitialState& psi0,
                            std::span<const double> times) {
  const Eigen::VectorXcd o = overlaps(total, psi0.total);
  const Index de = env_dimension(total);
  const Index b1 = qubit_bit(1) * de;
  const Index b2 = qubit_bit(2) * de;
  std::vector<Rdm> out;
  out.reserve(times.size());

  constexpr Index kBatch = 128;
  const Index count = static_cast<Index>(times.size());
  for (Index start = 0; start < count; start += kBatch) {
    const Index batch = std::min(kBatch, count - start);
    RealMatrix re(total.size(), batch), im(total.size(), batch);
    for (Index t = 0; t < batch; ++t) {
      const double time = times[static_cast<std::size_t>(start + t)];
      for (Index n = 0; n < total.size(); ++n) {
        const Complex a = o(n) * std::polar(1.0, -total.energies(n) * time);
        re(n, t) = a.real();
        im(n, t) = a.imag();
      }
    }
    const RealMatrix psi_re = total.vectors * re;
    const RealMatrix psi_im = total.vectors * im;
    for (Index t = 0; t < batch; ++t) {
      const Eigen::VectorXcd p1 =
          psi_re.col(t).segment(b1, de).cast<Complex>() + Complex(0, 1) * psi_im.col(t).segment(b1, de).cast<Complex>();
      const Eigen::VectorXcd p2 =
          psi_re.col(t).segment(b2, de).cast<Complex>() + Complex(0, 1) * psi_im.col(t).segment(b2, de).cast<Complex>();
      Rdm rho;
      // rho_{ab} = <E_b|E_a>; Eigen's dot conjugates its left operand.
      rho(0, 0) = p1.squaredNorm();
      rho(1, 1) = p2.squaredNorm();
      rho(0, 1) = p2.dot(p1);
      rho(1, 0) = std::conj(rho(0, 1));
      out.push_back(rho);
    }
  }
  return out;
}

std::vector<double> uniform_time_grid(double t_max, std::size_t points) {
  if (points < 2) throw ConfigurationError("time grid needs at least two points");
  std::vector<double> grid(points);
  for (std::size_t k = 0; k < points; ++k) {
    grid[k] = t_max * static_cast<double>(k) / static_cast<double>(points - 1);
  }
  return grid;
}

RdmAverage time_grid_average(std::span<const Rdm> series, std::span<const double> times,
                             double t_min, Index shell_count) {
  if (series.size() != times.size()) throw ConfigurationError("series/times size mismatch");
  RdmAverage out;
  out.method = AverageMethod::time_grid;
  std::size_t used = 0;
  double t_first = 0.0, t_last = 0.0;
  for (std::size_t k = 0; k < series.size(); ++k) {
    if (times[k] <= t_min) continue;
    if (used == 0) t_first = times[k];
    t_last = times[k];
    out.matrix += series[k];
    ++used;
  }
  if (used == 0) throw InsufficientDataError("no grid points beyond t_min");
  out.matrix /= static_cast<double>(used);
  if (used < 100 || t_last - t_first < t_min) {
    std::string msg = "time grid short (" + std::to_string(used) + " samples over [" +
                      std::to_string(t_first) + ", " + std::to_string(t_last) + "])";
    if (shell_count > 0) {
      msg += "; expect residual fluctuations ~ " +
             std::to_string(1.0 / std::sqrt(static_cast<double>(shell_count)));
    }
    out.warnings.push_back(msg);
  }
  return out;
}

ProductAmplitudes product_amplitudes(const EigenSystem& total, const EigenSystem& env) {
  if (env.dimension() != env_dimension(total)) {
    throw ConfigurationError("environment eigensystem does not match the total system");
  }
  return {env.vectors.transpose() * level_block(total, 1),
          env.vectors.transpose() * level_block(total, 2)};
}

namespace {

// Shared tail of both branch-weight variants. `source(beta)(n)` is the weight
// of total eigenstate n in the initial sub-branch beta.
BranchWeights assemble_weights(const EigenSystem& total, const ProductAmplitudes& amp,
                               const std::array<Eigen::VectorXd, 2>& source, double e0,
                               const QubitParams& qubit, const BranchOptions& options) {
  BranchWeights bw;
  std::array<RealMatrix, 2> sq{amp.c1.cwiseAbs2(), amp.c2.cwiseAbs2()};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      bw.q_profile[a][b] = sq[a] * source[b];
      bw.q_sums(a, b) = bw.q_profile[a][b].sum();
    }
  }

  bw.populations.resize(total.size(), 2);
  bw.populations.col(0) = level_block(total, 1).colwise().squaredNorm().transpose();
  bw.populations.col(1) = level_block(total, 2).colwise().squaredNorm().transpose();

  if (total.size() >= 30) {
    const std::span<const double> energies(total.energies.data(), static_cast<std::size_t>(total.size()));
    for (int a = 0; a < 2; ++a) {
      const Eigen::VectorXd pop = bw.populations.col(a);
      const SmoothCurve b_curve = sliding_average(
          energies, {pop.data(), static_cast<std::size_t>(pop.size())}, options.population_window);
      const double e_lo = e0 + qubit.level(1);
      const double e_hi = e0 + qubit.level(2);
      if (b_curve.covers(e_lo) && b_curve.covers(e_hi)) {
        bw.q_alpha(a) = 0.5 * (b_curve(e_lo) + b_curve(e_hi));
      } else {
        bw.q_alpha(a) = std::numeric_limits<double>::quiet_NaN();
        bw.warnings.push_back("B_alpha curve does not cover E_0 + E^S_alpha; Q_alpha undefined");
      }
    }
  }

  for (int a = 0; a < 2; ++a) {
    const int b = 1 - a;
    const double cross = bw.q_sums(a, b);
    if (cross > 0.0) {
      bw.ratio(a) = bw.q_sums(a, a) / cross;
    } else {
      bw.ratio(a) = std::numeric_limits<double>::quiet_NaN();
      bw.warnings.push_back("R_" + std::to_string(a + 1) + " undefined: cross-branch weight is zero");
    }
  }
  return bw;
}

void check_completeness(BranchWeights& bw, const ProductAmplitudes& amp,
                        const std::vector<Index>& members, const BranchOptions& options) {
  double deficit = 0.0;
  for (int b : {1, 2}) {
    for (Index j : members) deficit = std::max(deficit, 1.0 - amp[b].row(j).squaredNorm());
  }
  bw.completeness_deficit = deficit;
  if (deficit >= options.completeness_threshold) {
    throw TruncationError("eigensystem misses " + std::to_string(100.0 * deficit) +
                          "% of the shell's spectral weight; widen the window");
  }
}

}  // namespace

BranchWeights branch_weights(const EigenSystem& total, const EigenSystem& env,
                             const EnergyShell& shell, const QubitParams& qubit,
                             const BranchOptions& options) {
  if (shell.count() == 0) throw InsufficientDataError("energy shell holds no levels");
  const ProductAmplitudes amp = product_amplitudes(total, env);
  std::array<Eigen::VectorXd, 2> source;
  for (int b : {1, 2}) {
    source[b - 1] = Eigen::VectorXd::Zero(total.size());
    for (Index j : shell.members) source[b - 1] += amp[b].row(j).transpose().cwiseAbs2();
    source[b - 1] /= static_cast<double>(shell.count());
  }
  BranchWeights bw = assemble_weights(total, amp, source, shell.center, qubit, options);
  check_completeness(bw, amp, shell.members, options);
  return bw;
}

BranchWeights branch_weights_exact(const EigenSystem& total, const EigenSystem& env,
                                   const InitialState& psi0, const QubitParams& qubit,
                                   const BranchOptions& options) {
  const ProductAmplitudes amp = product_amplitudes(total, env);
  const Eigen::VectorXcd a = psi0.shell_coefficients / psi0.shell_coefficients.norm();
  std::array<Eigen::VectorXd, 2> source;
  for (int b : {1, 2}) {
    Eigen::VectorXcd proj = Eigen::VectorXcd::Zero(total.size());
    for (Index j = 0; j < psi0.shell.count(); ++j) {
      proj += a(j) * amp[b].row(psi0.shell.members[static_cast<std::size_t>(j)]).transpose().cast<Complex>();
    }
    source[b - 1] = proj.cwiseAbs2();
  }
  BranchWeights bw = assemble_weights(total, amp, source, psi0.shell.center, qubit, options);
  check_completeness(bw, amp, psi0.shell.members, options);
  return bw;
}

CoarseProfile coarse_grain(std::span<const double> profile, std::span<const double> energies,
                           double window_width, Index min_levels) {
  if (profile.size() != energies.size()) throw ConfigurationError("profile/energies size mismatch");
  if (!(window_width > 0.0)) throw ConfigurationError("window_width must be positive");
  if (energies.size() < static_cast<std::size_t>(std::max<Index>(min_levels, 1))) {
    throw InsufficientDataError("coarse_grain needs at least " + std::to_string(min_levels) + " levels");
  }
  // Mean occupancy of a window of this width across the populated range.
  const double range = energies.back() - energies.front();
  const double per_window =
      range > 0.0 ? static_cast<double>(energies.size()) * std::min(1.0, window_width / range)
                  : static_cast<double>(energies.size());
  if (per_window < static_cast<double>(min_levels)) {
    throw InsufficientDataError("coarse-graining window holds ~" + std::to_string(per_window) +
                                " levels, need " + std::to_string(min_levels));
  }

  CoarseProfile out;
  out.curve = sliding_average(energies, profile, window_width, 1);

  double mass = 0.0, moment = 0.0;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    mass += profile[i];
    moment += profile[i] * energies[i];
  }
  out.center_of_mass = mass != 0.0 ? moment / mass : std::numeric_limits<double>::quiet_NaN();

  const auto& v = out.curve.values;
  const auto& g = out.curve.support;
  const auto peak = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
  const double half = 0.5 * v[peak];
  auto crossing = [&](std::size_t inside, std::size_t outside) {
    const double t = (v[inside] - half) / (v[inside] - v[outside]);
    return g[inside] + t * (g[outside] - g[inside]);
  };
  std::size_t l = peak, r = peak;
  while (l > 0 && v[l - 1] >= half) --l;
  while (r + 1 < v.size() && v[r + 1] >= half) ++r;
  const double left = l > 0 ? crossing(l, l - 1) : g.front();
  const double right = r + 1 < v.size() ? crossing(r, r + 1) : g.back();
  out.half_width = 0.5 * (right - left);
  return out;
}

Eigen::Matrix2d system_operator_energy_basis(const InteractionSpec& interaction) {
  const Eigen::Matrix2d comp = interaction.system_operator();
  Eigen::Matrix2d e;
  for (int a : {1, 2}) {
    for (int b : {1, 2}) e(a - 1, b - 1) = comp(qubit_bit(a), qubit_bit(b));
  }
  return e;
}

FQuantities f_lta(const EigenSystem& total, const InitialState& psi0, const OperatorMatrix& obs_env,
                  const QubitParams& qubit, const InteractionSpec& interaction, double degeneracy_tol) {
  const Index de = env_dimension(total);
  if (obs_env.dimension() != de) throw ConfigurationError("environment observable dimension mismatch");
  const Eigen::VectorXcd o = overlaps(total, psi0.total);
  const std::array<RealMatrix, 2> u{RealMatrix(level_block(total, 1)), RealMatrix(level_block(total, 2))};
  const std::array<RealMatrix, 2> ou{obs_env.entries * u[0], obs_env.entries * u[1]};

  FQuantities fq;
  const auto clusters = degenerate_clusters(total.energies, degeneracy_tol);
  std::size_t degenerate = 0;
  for (const auto& [begin, end] : clusters) {
    if (end - begin > 1) ++degenerate;
    for (Index n = begin; n < end; ++n) {
      for (Index m = begin; m < end; ++m) {
        // avg f*_{a i} f_{b j} -> o_n^* o_m for n, m in one (possibly degenerate) level.
        const Complex w = std::conj(o(n)) * o(m);
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) {
            fq.f_bar(a, b) += w * u[a].col(n).dot(ou[b].col(m));
            // rho_{ab} = <E_b|E_a>
            fq.rho_bar(a, b) += std::conj(w) * u[b].col(m).dot(u[a].col(n));
          }
        }
      }
    }
  }
  if (degenerate > 0) fq.warnings.push_back(degeneracy_warning(degenerate));

  const Eigen::Matrix2d his = system_operator_energy_basis(interaction);
  const double es[2] = {qubit.level(1), qubit.level(2)};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const Complex w1 = (es[b] - es[a]) * fq.rho_bar(a, b);
      Complex w2 = 0.0;
      for (int g = 0; g < 2; ++g) w2 += his(g, b) * fq.f_bar(g, a) - his(a, g) * fq.f_bar(b, g);
      fq.balance_residual(a, b) = std::abs(w1 + w2);
    }
  }
  return fq;
}

}  // namespace qcoh
