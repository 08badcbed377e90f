#pragma once

// On-disk cache of eigensystems.
//
// File layout (all integers little-endian uint64, all reals little-endian float64):
//   magic "QCOHEIG1" (8 bytes)
//   dimension, count, has_window (0/1), window lo, window hi, key hash,
//   residual_max
//   energies[count]
//   vectors[dimension * count]   column-major
//
// Writers go through a temporary file and an atomic rename, so concurrent
// readers never see a partially written entry.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "qcoh/eigensolve.hpp"

namespace qcoh {

inline constexpr const char* kLibraryVersion = "1.0.0";

/// FNV-1a over the operator entries, the solver settings and the library version.
std::uint64_t content_hash(const OperatorMatrix& h, const SolverSettings& settings);

void write_eigensystem(const std::filesystem::path& file, const EigenSystem& es,
                       std::uint64_t key);
/// Returns nullopt when the file is missing, truncated or carries another key.
std::optional<EigenSystem> read_eigensystem(const std::filesystem::path& file,
                                            std::uint64_t key);

class EigenCache {
 public:
  /// Empty directory disables caching.
  explicit EigenCache(std::filesystem::path directory = {});

  /// Directory from QCOH_CACHE_DIR when set, otherwise `fallback`.
  static EigenCache from_environment(std::filesystem::path fallback = {});

  bool enabled() const { return !directory_.empty(); }
  const std::filesystem::path& directory() const { return directory_; }

  /// Cached full diagonalization of `h`.
  EigenSystem diagonalize(const OperatorMatrix& h, const SolverSettings& settings = {}) const;

  std::size_t hits() const { return hits_.load(); }
  std::size_t misses() const { return misses_.load(); }

 private:
  std::filesystem::path directory_;
  mutable std::atomic<std::size_t> hits_{0};
  mutable std::atomic<std::size_t> misses_{0};
};

}  // namespace qcoh
