#include "qcoh/eigen_cache.hpp"

#include <bit>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "qcoh/error.hpp"

namespace qcoh {

static_assert(std::endian::native == std::endian::little,
              "cache format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'Q', 'C', 'O', 'H', 'E', 'I', 'G', '1'};

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 1099511628211ULL;
    }
  }
  template <typename T>
  void value(const T& v) {
    bytes(&v, sizeof(T));
  }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 14695981039346656037ULL;
};

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void put_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }

bool get_u64(std::istream& in, std::uint64_t& v) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), 8));
}
bool get_f64(std::istream& in, double& v) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), 8));
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex;
  s.width(16);
  s.fill('0');
  s << v;
  return s.str();
}

}  // namespace

std::uint64_t content_hash(const OperatorMatrix& h, const SolverSettings& settings) {
  Fnv1a f;
  const std::uint64_t rows = static_cast<std::uint64_t>(h.entries.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(h.entries.cols());
  f.value(rows);
  f.value(cols);
  f.bytes(h.entries.data(), sizeof(double) * rows * cols);
  f.value(static_cast<std::uint64_t>(settings.dense_limit));
  f.value(settings.compute_residuals);
  f.value(settings.hermitian_tol);
  f.bytes(kLibraryVersion, std::strlen(kLibraryVersion));
  return f.digest();
}

void write_eigensystem(const std::filesystem::path& file, const EigenSystem& es,
                       std::uint64_t key) {
  std::filesystem::create_directories(file.parent_path());
  std::random_device rd;
  auto tmp = file;
  tmp += ".tmp" + hex((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write cache file " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    put_u64(out, static_cast<std::uint64_t>(es.dimension()));
    put_u64(out, static_cast<std::uint64_t>(es.size()));
    put_u64(out, es.window ? 1 : 0);
    put_f64(out, es.window ? es.window->lo : 0.0);
    put_f64(out, es.window ? es.window->hi : 0.0);
    put_u64(out, key);
    put_f64(out, es.residual_max);
    out.write(reinterpret_cast<const char*>(es.energies.data()),
              static_cast<std::streamsize>(sizeof(double) * es.size()));
    out.write(reinterpret_cast<const char*>(es.vectors.data()),
              static_cast<std::streamsize>(sizeof(double) * es.vectors.size()));
    if (!out) throw Error("short write to cache file " + tmp.string());
  }
  std::filesystem::rename(tmp, file);
}

std::optional<EigenSystem> read_eigensystem(const std::filesystem::path& file,
                                            std::uint64_t key) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) return std::nullopt;
  std::uint64_t dim = 0, count = 0, has_window = 0, stored_key = 0;
  double lo = 0, hi = 0, residual = 0;
  if (!get_u64(in, dim) || !get_u64(in, count) || !get_u64(in, has_window) ||
      !get_f64(in, lo) || !get_f64(in, hi) || !get_u64(in, stored_key) ||
      !get_f64(in, residual)) {
    return std::nullopt;
  }
  if (stored_key != key || count > dim) return std::nullopt;
  EigenSystem es;
  es.energies.resize(static_cast<Index>(count));
  es.vectors.resize(static_cast<Index>(dim), static_cast<Index>(count));
  es.residual_max = residual;
  if (has_window) es.window = SpectralWindow{lo, hi};
  if (!in.read(reinterpret_cast<char*>(es.energies.data()),
               static_cast<std::streamsize>(sizeof(double) * count)) ||
      !in.read(reinterpret_cast<char*>(es.vectors.data()),
               static_cast<std::streamsize>(sizeof(double) * dim * count))) {
    return std::nullopt;
  }
  return es;
}

EigenCache::EigenCache(std::filesystem::path directory) : directory_(std::move(directory)) {}

EigenCache EigenCache::from_environment(std::filesystem::path fallback) {
  if (const char* env = std::getenv("QCOH_CACHE_DIR"); env != nullptr && *env != '\0') {
    return EigenCache(env);
  }
  return EigenCache(std::move(fallback));
}

EigenSystem EigenCache::diagonalize(const OperatorMatrix& h, const SolverSettings& settings) const {
  if (!enabled()) return full_diagonalize(h, settings);
  const std::uint64_t key = content_hash(h, settings);
  const auto file = directory_ / ("eig-" + hex(key) + ".bin");
  if (auto cached = read_eigensystem(file, key)) {
    ++hits_;
    return std::move(*cached);
  }
  ++misses_;
  EigenSystem es = full_diagonalize(h, settings);
  write_eigensystem(file, es, key);
  return es;
}

}  // namespace qcoh
