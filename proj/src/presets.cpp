// Bundled experiment presets. All stay at N <= 12 so every one fits dense
// diagonalization on a desktop.

#include <cmath>
#include <functional>
#include <map>

#include "qcoh/error.hpp"
#include "qcoh/experiments.hpp"

namespace qcoh {

namespace {

struct Preset {
  std::string description;
  std::function<void(ExperimentConfig&)> apply;
};

const QubitState kTilted{{0.5, 0.0}, {std::sqrt(3.0) / 2.0, 0.0}};
const QubitState kUpper{{0.0, 0.0}, {1.0, 0.0}};
const QubitState kBalanced{{1.0 / std::sqrt(2.0), 0.0}, {1.0 / std::sqrt(2.0), 0.0}};

const std::map<std::string, Preset>& registry() {
  static const std::map<std::string, Preset> presets{
      {"minimal",
       {"N=6 chain, unfolded level spacings over the whole spectrum",
        [](ExperimentConfig& c) {
          c.model.n_sites = {6};
          c.model.site = 3;
          c.analysis.stages = {"spacing"};
          c.analysis.spacing_fraction = 1.0;
        }}},
      {"fig1",
       {"diagonal elements of sigma^x_7 and sigma^z_7 against E_i, N=12",
        [](ExperimentConfig& c) {
          c.model.n_sites = {12};
          c.model.axes = {Axis::x, Axis::z};
          c.analysis.stages = {"diagonal", "spacing"};
        }}},
      {"fig2",
       {"sigma_d and sigma_nd of sigma^x_7, sigma^z_7 for N = 8, 10, 12 (120 levels nearest E_0)",
        [](ExperimentConfig& c) {
          c.model.n_sites = {8, 10, 12};
          c.model.axes = {Axis::x, Axis::z};
          c.analysis.stages = {"eth"};
        }}},
      {"fig3",
       {"histograms of rescaled off-diagonal elements at N=12 (150 levels nearest E_0)",
        [](ExperimentConfig& c) {
          c.model.n_sites = {12};
          c.model.axes = {Axis::x, Axis::z};
          c.analysis.eth_levels = 150;
          c.analysis.stages = {"offdiag", "eth"};
        }}},
      {"fig4",
       {"coarse-grained Q profiles, N=10, Delta_S=0.6, dE=0.3, lambda in {0.15, 0.3, 0.6, 1.0}",
        [](ExperimentConfig& c) {
          c.model.n_sites = {10};
          c.model.lambda = {0.15, 0.3, 0.6, 1.0};
          c.analysis.stages = {"q_profile"};
        }}},
      {"fig5",
       {"branch ratio R_alpha against lambda for N = 8, 10",
        [](ExperimentConfig& c) {
          c.model.n_sites = {8, 10};
          c.model.lambda = {0.1, 0.2, 0.4, 0.7, 1.0};
          c.initial.seeds = {1, 2, 3};
          c.analysis.stages = {"ratio"};
        }}},
      {"fig6",
       {"|rho_12| against lambda (log grid) for S^x coupled to sigma^z_7 and sigma^x_7, (c1,c2)=(1/2,sqrt(3)/2)",
        [](ExperimentConfig& c) {
          c.model.n_sites = {10};
          c.model.axes = {Axis::z, Axis::x};
          c.model.lambda = {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0};
          c.initial.states = {kTilted};
          c.analysis.stages = {"coherence"};
        }}},
      {"fig7",
       {"|rho_12| against lambda for S^x (x) sigma^x_7, (c1,c2) = (0,1) and (1/sqrt2,1/sqrt2)",
        [](ExperimentConfig& c) {
          c.model.n_sites = {10};
          c.model.lambda = {0.1, 0.2, 0.3, 0.45, 0.6, 0.8, 1.0, 1.5};
          c.initial.states = {kUpper, kBalanced};
          c.analysis.stages = {"coherence"};
        }}},
      {"fig8",
       {"as fig7 with generic H^IS = lambda (S^z + S^x), f1 = f2 = 1",
        [](ExperimentConfig& c) {
          c.model.n_sites = {10};
          c.model.f1 = 1.0;
          c.model.f2 = 1.0;
          c.model.lambda = {0.1, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0};
          c.initial.states = {kUpper, kBalanced};
          c.analysis.stages = {"coherence"};
        }}},
  };
  return presets;
}

}  // namespace

std::vector<PresetInfo> list_presets() {
  std::vector<PresetInfo> out;
  for (const auto& [name, p] : registry()) out.push_back({name, p.description});
  return out;
}

ExperimentConfig preset_config(const std::string& name) {
  const auto it = registry().find(name);
  if (it == registry().end()) throw ConfigurationError("unknown preset '" + name + "'");
  ExperimentConfig c;
  c.name = name;
  c.description = it->second.description;
  c.output.directory = std::filesystem::path("qcoh_out") / name;
  it->second.apply(c);
  c.validate();
  return c;
}

}  // namespace qcoh
