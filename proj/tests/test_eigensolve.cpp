#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "qcoh/eigen_cache.hpp"
#include "qcoh/eigensolve.hpp"
#include "qcoh/error.hpp"
#include "qcoh/spin_lattice.hpp"

using namespace qcoh;
namespace fs = std::filesystem;

namespace {

OperatorMatrix wrap(const RealMatrix& m) { return OperatorMatrix{m, "test"}; }

// Characteristic polynomial coefficients c_0..c_n of det(x - A), c_n = 1,
// from the Faddeev-LeVerrier recursion.
std::vector<long double> char_poly(const RealMatrix& a) {
  const Index n = a.rows();
  using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const LMat al = a.cast<long double>();
  std::vector<long double> c(static_cast<std::size_t>(n + 1), 0.0L);
  c[static_cast<std::size_t>(n)] = 1.0L;
  LMat m = LMat::Zero(n, n);
  for (Index k = 1; k <= n; ++k) {
    m = al * m + c[static_cast<std::size_t>(n - k + 1)] * LMat::Identity(n, n);
    c[static_cast<std::size_t>(n - k)] = -(al * m).trace() / static_cast<long double>(k);
  }
  return c;
}

// Newton step p(x)/p'(x): small when x is a simple root.
long double newton_step(const std::vector<long double>& c, long double x) {
  long double p = 0.0L, dp = 0.0L;
  for (std::size_t i = c.size(); i-- > 0;) {
    dp = dp * x + p;
    p = p * x + c[i];
  }
  return p / dp;
}

RealMatrix random_symmetric(Index n, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> g;
  RealMatrix m(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) m(i, j) = m(j, i) = g(gen);
  }
  return m;
}

EigenSystem levels(std::vector<double> e) {
  EigenSystem es;
  es.energies = Eigen::Map<Eigen::VectorXd>(e.data(), static_cast<Index>(e.size()));
  es.vectors = RealMatrix::Identity(es.size(), es.size());
  return es;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("qcoh_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE("eigensolve") {
  TEST_CASE("identity and single Pauli") {
    const auto id = full_diagonalize(wrap(RealMatrix::Identity(4, 4)));
    CHECK(id.energies.isApprox(Eigen::VectorXd::Ones(4)));
    const auto px = full_diagonalize(build_local_pauli(1, 1, Axis::x));
    CHECK(px.energies(0) == doctest::Approx(-1.0));
    CHECK(px.energies(1) == doctest::Approx(1.0));
    const double s = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(px.vectors(0, 1)) == doctest::Approx(s));
    CHECK(px.vectors(0, 1) * px.vectors(1, 1) > 0.0);
    CHECK(px.vectors(0, 0) * px.vectors(1, 0) < 0.0);
  }

  TEST_CASE("eigenvalues are roots of the characteristic polynomial") {
    ChainParams p;
    p.n_sites = 3;
    p.defects = {{1, 1.11}};
    const auto h = build_env_hamiltonian(p);
    const auto c = char_poly(h.entries);
    const auto es = full_diagonalize(h);
    for (Index n = 0; n < es.size(); ++n) CHECK(std::abs(static_cast<double>(newton_step(c, es.energies(n)))) < 1e-9);

    const RealMatrix r = random_symmetric(7, 3);
    const auto cr = char_poly(r);
    const auto er = full_diagonalize(wrap(r));
    for (Index n = 0; n < er.size(); ++n) CHECK(std::abs(static_cast<double>(newton_step(cr, er.energies(n)))) < 1e-9);
    // Trace is the sum of eigenvalues; determinant their product.
    CHECK(er.energies.sum() == doctest::Approx(r.trace()).epsilon(1e-12));
    CHECK(er.energies.prod() == doctest::Approx(r.determinant()).epsilon(1e-10));
  }

  TEST_CASE("reconstruction and orthonormality on a chain Hamiltonian") {
    const auto h = build_total_hamiltonian(QubitParams{}, ChainParams::standard(6),
                                           InteractionSpec{0.3, 0.0, 1.0, Axis::x, 6});
    const auto es = full_diagonalize(h);
    const RealMatrix back = es.vectors * es.energies.asDiagonal() * es.vectors.transpose();
    CHECK((back - h.entries).cwiseAbs().maxCoeff() < 1e-11);
    const RealMatrix gram = es.vectors.transpose() * es.vectors;
    CHECK((gram - RealMatrix::Identity(es.size(), es.size())).cwiseAbs().maxCoeff() < 1e-11);
    CHECK(es.energies.sum() == doctest::Approx(h.entries.trace()).epsilon(1e-10));
    CHECK(es.residual_max < 1e-10);
    CHECK(es.complete());
    for (Index n = 1; n < es.size(); ++n) CHECK(es.energies(n) >= es.energies(n - 1));
  }

  TEST_CASE("largest component of every eigenvector is positive") {
    const auto es = full_diagonalize(wrap(random_symmetric(20, 11)));
    for (Index n = 0; n < es.size(); ++n) {
      Index at = 0;
      es.vectors.col(n).cwiseAbs().maxCoeff(&at);
      CHECK(es.vectors(at, n) > 0.0);
    }
  }

  TEST_CASE("size and symmetry contracts") {
    SolverSettings small;
    small.dense_limit = 4;
    CHECK_THROWS_AS(full_diagonalize(wrap(RealMatrix::Identity(8, 8)), small), CapacityError);
    RealMatrix asym = RealMatrix::Identity(3, 3);
    asym(0, 1) = 0.5;
    CHECK_THROWS_AS(full_diagonalize(wrap(asym)), ContractViolation);
    CHECK_THROWS_AS(full_diagonalize(wrap(RealMatrix::Zero(3, 2))), ContractViolation);
  }

  TEST_CASE("window selection") {
    const auto es = full_diagonalize(wrap(random_symmetric(30, 5)));
    const auto all = window_select(es, SpectralWindow::everything());
    CHECK(all.size() == es.size());
    CHECK_FALSE(all.window.has_value());

    const double top = es.energies.maxCoeff();
    const auto none = window_select(es, SpectralWindow{top + 1.0, top + 2.0});
    CHECK(none.empty());

    const auto outer = window_select(es, SpectralWindow::around(0.0, 3.0));
    const auto inner = window_select(outer, SpectralWindow::around(0.0, 1.0));
    const auto direct = window_select(es, SpectralWindow::around(0.0, 1.0));
    CHECK(inner.size() == direct.size());
    CHECK(inner.energies.isApprox(direct.energies));
    for (Index n = 0; n < inner.size(); ++n) CHECK(std::abs(inner.energies(n)) <= 1.0);
    CHECK(inner.window.has_value());
    CHECK_THROWS_AS(SpectralWindow::around(0.0, 0.0), ConfigurationError);
  }

  TEST_CASE("nearest-level selection keeps the closest levels") {
    const auto es = full_diagonalize(wrap(random_symmetric(40, 9)));
    const double center = 0.7;
    const auto near = window_select_nearest(es, center, 12);
    REQUIRE(near.size() == 12);
    double worst_in = 0.0;
    for (Index n = 0; n < near.size(); ++n) worst_in = std::max(worst_in, std::abs(near.energies(n) - center));
    int closer_outside = 0;
    for (Index n = 0; n < es.size(); ++n) {
      bool member = false;
      for (Index m = 0; m < near.size(); ++m) member |= near.energies(m) == es.energies(n);
      if (!member && std::abs(es.energies(n) - center) < worst_in) ++closer_outside;
    }
    CHECK(closer_outside == 0);
    for (Index n = 1; n < near.size(); ++n) CHECK(near.energies(n) > near.energies(n - 1));
  }

  TEST_CASE("degeneracy report") {
    SUBCASE("picket fence has equal gaps and no degenerate levels") {
      const auto r = degeneracy_check(levels({0.0, 1.0, 2.0, 3.0}));
      CHECK(r.degenerate_levels.empty());
      CHECK(r.degenerate_gaps.size() == 2);
    }
    SUBCASE("uncoupled qubit tuned to a chain gap gives degenerate levels") {
      const ChainParams p = ChainParams::standard(5);
      const auto env = full_diagonalize(build_env_hamiltonian(p));
      const QubitParams q{env.energies(1) - env.energies(0)};
      const auto tot = full_diagonalize(build_total_hamiltonian(q, p, InteractionSpec{0.0, 0.0, 1.0, Axis::x, 3}));
      CHECK_FALSE(degeneracy_check(tot, 1e-9).degenerate_levels.empty());
    }
    SUBCASE("even-length defect chain: distinct levels, mirror-paired gaps") {
      const auto env = full_diagonalize(build_env_hamiltonian(ChainParams::standard(10)));
      const auto r = degeneracy_check(env, 1e-10);
      CHECK(r.degenerate_levels.empty());
      // The spectrum is symmetric under E -> -E, so gaps come in equal pairs.
      const Index n = env.size();
      for (Index i = 0; i < n; ++i) CHECK(env.energies(i) == doctest::Approx(-env.energies(n - 1 - i)).epsilon(1e-9));
      CHECK_FALSE(r.degenerate_gaps.empty());
    }
  }

  TEST_CASE("degenerate clusters") {
    Eigen::VectorXd e(5);
    e << 0.0, 1.0, 1.0 + 1e-13, 2.0, 3.0;
    const auto c = degenerate_clusters(e, 1e-10);
    REQUIRE(c.size() == 4);
    CHECK(c[1] == std::pair<Index, Index>{1, 3});
  }

  TEST_CASE("shift-invert Lanczos agrees with dense diagonalization") {
    const QubitParams q;
    const ChainParams p = ChainParams::standard(7);
    const InteractionSpec i{0.3, 0.0, 1.0, Axis::x, 7};
    const auto dense = full_diagonalize(build_total_hamiltonian(q, p, i));
    const double center = -1.2037;
    const auto lanczos = interior_eigenpairs(build_total_hamiltonian_sparse(q, p, i), center, 10);
    const auto ref = window_select_nearest(dense, center, 10);
    REQUIRE(lanczos.size() == 10);
    for (Index n = 0; n < 10; ++n) {
      CHECK(lanczos.energies(n) == doctest::Approx(ref.energies(n)).epsilon(1e-9));
      CHECK(std::abs(lanczos.vectors.col(n).dot(ref.vectors.col(n))) == doctest::Approx(1.0).epsilon(1e-7));
    }
    CHECK(lanczos.residual_max < 1e-8);
  }

  TEST_CASE("cache file roundtrip and rejection") {
    TempDir dir;
    const auto h = build_env_hamiltonian(ChainParams::standard(6));
    const auto es = full_diagonalize(h);
    const fs::path file = dir.path / "entry.bin";
    const std::uint64_t key = content_hash(h, SolverSettings{});
    write_eigensystem(file, es, key);

    const auto back = read_eigensystem(file, key);
    REQUIRE(back.has_value());
    CHECK(back->energies == es.energies);
    CHECK(back->vectors == es.vectors);
    CHECK_FALSE(read_eigensystem(file, key + 1).has_value());
    CHECK_FALSE(read_eigensystem(dir.path / "missing.bin", key).has_value());

    fs::resize_file(file, fs::file_size(file) / 2);
    CHECK_FALSE(read_eigensystem(file, key).has_value());

    auto h2 = h;
    h2.entries(0, 0) += 1e-9;
    CHECK(content_hash(h2, SolverSettings{}) != key);
  }

  TEST_CASE("cache counts hits and misses and returns identical data") {
    TempDir dir;
    const EigenCache cache(dir.path);
    const auto h = build_env_hamiltonian(ChainParams::standard(5));
    const auto first = cache.diagonalize(h);
    const auto second = cache.diagonalize(h);
    CHECK(cache.misses() == 1);
    CHECK(cache.hits() == 1);
    CHECK(first.energies == second.energies);
    CHECK(first.vectors == second.vectors);

    const EigenCache off;
    CHECK_FALSE(off.enabled());
    CHECK(off.diagonalize(h).energies.isApprox(first.energies));
  }
}
