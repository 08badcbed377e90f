#pragma once

// Config-driven experiment runner. A config names a model (possibly swept over
// chain length, coupling axis and lambda), an energy shell, initial qubit
// states with shell seeds, and the analysis stages to run. Every stage writes
// CSV files (comment line with the config hash, then a header row) and the run
// ends with a JSON manifest listing them.
//
// Stages and the files they write:
//   operators    operators.csv
//   spectrum     spectrum_N{n}.csv, spectrum_total_N{n}_{axis}_lambda{l}.csv
//   spacing      spacings_N{n}.csv, spacing_summary.csv
//   diagonal     diagonal_N{n}.csv
//   eth          eth_scaling.csv
//   offdiag      offdiag_hist_N{n}_{axis}.csv
//   q_profile    q_profile_N{n}_{axis}_lambda{l}.csv, q_summary.csv
//   ratio        ratio.csv
//   coherence    coherence.csv
//   time_oracle  time_oracle.csv

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "qcoh/eigensolve.hpp"
#include "qcoh/quench.hpp"
#include "qcoh/spin_lattice.hpp"

namespace qcoh {

struct ModelSection {
  std::vector<int> n_sites{10};
  double h_x = 0.9;
  double j_z = 1.0;
  std::vector<Defect> defects{{1, 1.11}, {5, 0.6}};
  bool periodic = true;
  double delta_s = 0.6;
  std::vector<double> lambda{0.3};
  double f1 = 0.0;
  double f2 = 1.0;
  std::vector<Axis> axes{Axis::x};
  int site = 7;

  ChainParams chain(int n) const;
  InteractionSpec interaction(double lam, Axis axis) const;
};

struct ShellSection {
  double center = -1.2;
  double width = 0.3;
};

struct InitialSection {
  std::vector<QubitState> states{QubitState{{0.5, 0.0}, {0.8660254037844386, 0.0}}};
  std::vector<std::uint64_t> seeds{1};
};

struct AnalysisSection {
  std::vector<std::string> stages{"spacing"};
  double spacing_fraction = 0.6;
  Index eth_levels = 120;         // shell for ETH statistics: this many levels nearest E_0
  int histogram_bins = 40;
  double h_window = 0.3;          // smoothing width for h(E)
  double coarse_window = 0.3;     // coarse-graining width for Q profiles
  double t_max = 1e4;
  std::size_t t_points = 2000;
  double t_min = 1e3;
};

struct OutputSection {
  std::filesystem::path directory = "qcoh_out";
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string description;
  ModelSection model;
  ShellSection shell;
  InitialSection initial;
  AnalysisSection analysis;
  OutputSection output;
  SolverSettings solver;

  /// Throws InvalidSiteError / ParseError for inconsistent settings.
  void validate() const;
  /// Hash of every numeric setting (the output directory is excluded).
  std::string hash() const;
  /// Canonical JSON text of the config.
  std::string to_json_text() const;
  bool has_stage(std::string_view stage) const;
};

/// Parses JSON config text. Unknown keys and bad values raise ParseError naming the key.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& file);

/// All stage names understood by run_experiment, in execution order.
const std::vector<std::string>& known_stages();

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct RunManifest {
  std::string config_name;
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  SolverSettings solver;
  std::string version;
  int threads = 1;
  std::vector<StageTiming> timings;
  std::vector<std::string> output_files;  // relative to the output directory
  std::vector<std::string> warnings;
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;

  std::string to_json_text() const;
};

struct RunOptions {
  int threads = 1;
  /// Empty: no caching unless QCOH_CACHE_DIR is set.
  std::filesystem::path cache_dir;
};

/// Runs every requested stage and writes outputs plus manifest.json into
/// config.output.directory.
RunManifest run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

struct PresetInfo {
  std::string name;
  std::string description;
};

std::vector<PresetInfo> list_presets();
/// Throws ConfigurationError for an unknown name.
ExperimentConfig preset_config(const std::string& name);

}  // namespace qcoh
