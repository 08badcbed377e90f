// Command-line front end: qcoh <verb> [options]

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <set>

#include "qcoh/error.hpp"
#include "qcoh/experiments.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> seeds;
  std::string out;
  std::string cache;
  int threads = 1;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "first shell-state seed");
  app->add_option("--seeds", c.seeds, "number of shell-state realizations")->check(CLI::PositiveNumber);
  app->add_option("--out", c.out, "output directory");
  app->add_option("--cache", c.cache, "eigensystem cache directory (QCOH_CACHE_DIR takes precedence)");
  app->add_option("--threads", c.threads, "concurrent sweep points")->check(CLI::PositiveNumber);
}

void apply_overrides(qcoh::ExperimentConfig& cfg, const Common& c) {
  if (c.seed || c.seeds) {
    const std::uint64_t first = c.seed.value_or(cfg.initial.seeds.front());
    const int count = c.seeds.value_or(static_cast<int>(cfg.initial.seeds.size()));
    cfg.initial.seeds.clear();
    for (int i = 0; i < count; ++i) cfg.initial.seeds.push_back(first + static_cast<std::uint64_t>(i));
  }
  if (!c.out.empty()) cfg.output.directory = c.out;
}

// Keeps the config's stages that belong to `allowed`; falls back to `fallback`.
void restrict_stages(qcoh::ExperimentConfig& cfg, const std::set<std::string>& allowed,
                     const std::vector<std::string>& fallback) {
  std::vector<std::string> keep;
  for (const auto& s : cfg.analysis.stages) {
    if (allowed.count(s)) keep.push_back(s);
  }
  cfg.analysis.stages = keep.empty() ? fallback : keep;
}

int run(qcoh::ExperimentConfig cfg, const Common& c) {
  apply_overrides(cfg, c);
  cfg.validate();
  qcoh::RunOptions opts;
  opts.threads = c.threads;
  opts.cache_dir = c.cache;
  const qcoh::RunManifest m = qcoh::run_experiment(cfg, opts);
  std::printf("config %s (hash %s) -> %s\n", m.config_name.c_str(), m.config_hash.c_str(),
              cfg.output.directory.string().c_str());
  for (const auto& f : m.output_files) std::printf("  %s\n", f.c_str());
  for (const auto& t : m.timings) std::printf("  [%s] %.2f s\n", t.stage.c_str(), t.seconds);
  for (const auto& w : m.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qcoh: qubit coherence in a chaotic spin-chain environment"};
  app.require_subcommand(1);

  Common build_opts, diag_opts, stats_opts, lta_opts, sweep_opts, preset_opts;
  auto* build = app.add_subcommand("build", "assemble Hamiltonians and report their structure");
  auto* diag = app.add_subcommand("diag", "diagonalize chain and total Hamiltonians, write spectra");
  auto* stats = app.add_subcommand("stats", "level statistics and eigenstate-thermalization diagnostics");
  auto* lta = app.add_subcommand("lta", "long-time averages, branch weights and theory overlays");
  auto* sweep = app.add_subcommand("sweep", "run every stage listed in the config");
  auto* preset = app.add_subcommand("preset", "run a bundled preset");
  auto* list = app.add_subcommand("list-presets", "list bundled presets");
  add_common(build, build_opts);
  add_common(diag, diag_opts);
  add_common(stats, stats_opts);
  add_common(lta, lta_opts);
  add_common(sweep, sweep_opts);
  add_common(preset, preset_opts);
  std::string preset_name;
  bool print_config = false;
  preset->add_option("name", preset_name, "preset name")->required();
  preset->add_flag("--print-config", print_config, "print the preset config as JSON and exit");

  CLI11_PARSE(app, argc, argv);

  auto load = [](const Common& c) {
    return c.config.empty() ? qcoh::ExperimentConfig{} : qcoh::load_config(c.config);
  };

  try {
    if (*list) {
      for (const auto& p : qcoh::list_presets()) std::printf("%-8s %s\n", p.name.c_str(), p.description.c_str());
      return 0;
    }
    if (*build) {
      auto cfg = load(build_opts);
      cfg.analysis.stages = {"operators"};
      return run(cfg, build_opts);
    }
    if (*diag) {
      auto cfg = load(diag_opts);
      cfg.analysis.stages = {"spectrum"};
      return run(cfg, diag_opts);
    }
    if (*stats) {
      auto cfg = load(stats_opts);
      restrict_stages(cfg, {"spacing", "diagonal", "eth", "offdiag"}, {"spacing", "eth"});
      return run(cfg, stats_opts);
    }
    if (*lta) {
      auto cfg = load(lta_opts);
      restrict_stages(cfg, {"coherence", "q_profile", "ratio", "time_oracle"}, {"coherence"});
      return run(cfg, lta_opts);
    }
    if (*sweep) return run(load(sweep_opts), sweep_opts);
    if (*preset) {
      auto cfg = qcoh::preset_config(preset_name);
      if (print_config) {
        apply_overrides(cfg, preset_opts);
        std::cout << cfg.to_json_text() << '\n';
        return 0;
      }
      return run(cfg, preset_opts);
    }
  } catch (const qcoh::ParseError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const qcoh::CapacityError& e) {
    std::fprintf(stderr, "capacity error: %s\n", e.what());
    return 3;
  } catch (const qcoh::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
