#include "qcoh/experiments.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "qcoh/eigen_cache.hpp"
#include "qcoh/error.hpp"
#include "qcoh/spectral_stats.hpp"
#include "qcoh/theory.hpp"

namespace qcoh {

using nlohmann::json;

namespace {

const std::set<std::string>& env_stages() {
  static const std::set<std::string> s{"spectrum", "spacing", "diagonal", "eth", "offdiag"};
  return s;
}

const std::set<std::string>& total_stages() {
  static const std::set<std::string> s{"spectrum", "q_profile", "ratio", "coherence", "time_oracle"};
  return s;
}

// ---------------------------------------------------------------------------
// Config parsing

[[noreturn]] void bad(const std::string& key, const std::string& what) { throw ParseError(key, what); }

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) bad(path, "expected an object");
  for (const auto& [k, v] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; })) {
      bad(path.empty() ? k : path + "." + k, "unknown key");
    }
  }
}

double get_number(const json& v, const std::string& key) {
  if (!v.is_number()) bad(key, "expected a number");
  return v.get<double>();
}

int get_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) bad(key, "expected an integer");
  return v.get<int>();
}

// A scalar or a nonempty array of scalars.
template <typename T, typename F>
std::vector<T> get_list(const json& v, const std::string& key, F&& one) {
  std::vector<T> out;
  if (v.is_array()) {
    if (v.empty()) bad(key, "sweep grid must be nonempty");
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(one(v[i], key + "[" + std::to_string(i) + "]"));
  } else {
    out.push_back(one(v, key));
  }
  return out;
}

Complex get_complex(const json& v, const std::string& key) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
    return {v[0].get<double>(), v[1].get<double>()};
  }
  bad(key, "expected a number or [re, im]");
}

Axis get_axis(const json& v, const std::string& key) {
  if (!v.is_string()) bad(key, "expected \"x\" or \"z\"");
  try {
    return axis_from_string(v.get<std::string>());
  } catch (const Error& e) {
    bad(key, e.what());
  }
}

void parse_model(const json& m, ModelSection& out) {
  check_keys(m, "model", {"n_sites", "h_x", "j_z", "defects", "periodic", "delta_s", "interaction"});
  if (m.contains("n_sites")) out.n_sites = get_list<int>(m["n_sites"], "model.n_sites", get_int);
  if (m.contains("h_x")) out.h_x = get_number(m["h_x"], "model.h_x");
  if (m.contains("j_z")) out.j_z = get_number(m["j_z"], "model.j_z");
  if (m.contains("periodic")) {
    if (!m["periodic"].is_boolean()) bad("model.periodic", "expected true or false");
    out.periodic = m["periodic"].get<bool>();
  }
  if (m.contains("delta_s")) out.delta_s = get_number(m["delta_s"], "model.delta_s");
  if (m.contains("defects")) {
    const json& d = m["defects"];
    if (!d.is_array()) bad("model.defects", "expected an array");
    out.defects.clear();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const std::string key = "model.defects[" + std::to_string(i) + "]";
      check_keys(d[i], key, {"site", "strength"});
      if (!d[i].contains("site") || !d[i].contains("strength")) bad(key, "needs site and strength");
      out.defects.push_back({get_int(d[i]["site"], key + ".site"), get_number(d[i]["strength"], key + ".strength")});
    }
  }
  if (m.contains("interaction")) {
    const json& i = m["interaction"];
    check_keys(i, "model.interaction", {"lambda", "f1", "f2", "axis", "site"});
    if (i.contains("lambda")) out.lambda = get_list<double>(i["lambda"], "model.interaction.lambda", get_number);
    if (i.contains("f1")) out.f1 = get_number(i["f1"], "model.interaction.f1");
    if (i.contains("f2")) out.f2 = get_number(i["f2"], "model.interaction.f2");
    if (i.contains("axis")) out.axes = get_list<Axis>(i["axis"], "model.interaction.axis", get_axis);
    if (i.contains("site")) out.site = get_int(i["site"], "model.interaction.site");
  }
}

void parse_initial(const json& s, InitialSection& out) {
  check_keys(s, "initial", {"states", "seeds"});
  if (s.contains("states")) {
    const json& st = s["states"];
    if (!st.is_array() || st.empty()) bad("initial.states", "expected a nonempty array of [c1, c2]");
    out.states.clear();
    for (std::size_t i = 0; i < st.size(); ++i) {
      const std::string key = "initial.states[" + std::to_string(i) + "]";
      if (!st[i].is_array() || st[i].size() != 2) bad(key, "expected [c1, c2]");
      out.states.push_back({get_complex(st[i][0], key + "[0]"), get_complex(st[i][1], key + "[1]")});
    }
  }
  if (s.contains("seeds")) {
    out.seeds = get_list<std::uint64_t>(s["seeds"], "initial.seeds", [](const json& v, const std::string& key) {
      if (!v.is_number_unsigned()) bad(key, "expected a nonnegative integer");
      return v.get<std::uint64_t>();
    });
  }
}

void parse_analysis(const json& a, AnalysisSection& out) {
  check_keys(a, "analysis", {"stages", "spacing_fraction", "eth_levels", "histogram_bins", "h_window",
                             "coarse_window", "t_max", "t_points", "t_min"});
  if (a.contains("stages")) {
    out.stages = get_list<std::string>(a["stages"], "analysis.stages", [](const json& v, const std::string& key) {
      if (!v.is_string()) bad(key, "expected a stage name");
      return v.get<std::string>();
    });
  }
  if (a.contains("spacing_fraction")) out.spacing_fraction = get_number(a["spacing_fraction"], "analysis.spacing_fraction");
  if (a.contains("eth_levels")) out.eth_levels = get_int(a["eth_levels"], "analysis.eth_levels");
  if (a.contains("histogram_bins")) out.histogram_bins = get_int(a["histogram_bins"], "analysis.histogram_bins");
  if (a.contains("h_window")) out.h_window = get_number(a["h_window"], "analysis.h_window");
  if (a.contains("coarse_window")) out.coarse_window = get_number(a["coarse_window"], "analysis.coarse_window");
  if (a.contains("t_max")) out.t_max = get_number(a["t_max"], "analysis.t_max");
  if (a.contains("t_points")) out.t_points = static_cast<std::size_t>(get_int(a["t_points"], "analysis.t_points"));
  if (a.contains("t_min")) out.t_min = get_number(a["t_min"], "analysis.t_min");
}

json complex_json(const Complex& c) {
  if (c.imag() == 0.0) return c.real();
  return json::array({c.real(), c.imag()});
}

json config_json(const ExperimentConfig& c, bool with_output) {
  json defects = json::array();
  for (const auto& d : c.model.defects) defects.push_back({{"site", d.site}, {"strength", d.strength}});
  json axes = json::array();
  for (Axis a : c.model.axes) axes.push_back(to_string(a));
  json states = json::array();
  for (const auto& s : c.initial.states) states.push_back(json::array({complex_json(s.c1), complex_json(s.c2)}));
  json j = {
      {"name", c.name},
      {"description", c.description},
      {"model",
       {{"n_sites", c.model.n_sites},
        {"h_x", c.model.h_x},
        {"j_z", c.model.j_z},
        {"defects", defects},
        {"periodic", c.model.periodic},
        {"delta_s", c.model.delta_s},
        {"interaction",
         {{"lambda", c.model.lambda}, {"f1", c.model.f1}, {"f2", c.model.f2}, {"axis", axes}, {"site", c.model.site}}}}},
      {"shell", {{"center", c.shell.center}, {"width", c.shell.width}}},
      {"initial", {{"states", states}, {"seeds", c.initial.seeds}}},
      {"analysis",
       {{"stages", c.analysis.stages},
        {"spacing_fraction", c.analysis.spacing_fraction},
        {"eth_levels", c.analysis.eth_levels},
        {"histogram_bins", c.analysis.histogram_bins},
        {"h_window", c.analysis.h_window},
        {"coarse_window", c.analysis.coarse_window},
        {"t_max", c.analysis.t_max},
        {"t_points", c.analysis.t_points},
        {"t_min", c.analysis.t_min}}},
      {"solver", {{"dense_limit", c.solver.dense_limit}, {"hermitian_tol", c.solver.hermitian_tol}}},
  };
  if (with_output) j["output"] = {{"directory", c.output.directory.string()}};
  return j;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Output helpers

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Csv {
  std::string file;
  std::ostringstream body;

  Csv(std::string name, const std::string& header) : file(std::move(name)) { body << header << '\n'; }

  template <typename... Cells>
  void row(const Cells&... cells) {
    std::size_t i = 0;
    ((body << (i++ ? "," : "") << cell(cells)), ...);
    body << '\n';
  }

 private:
  static std::string cell(double v) { return num(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(long long v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }
};

class Timer {
 public:
  explicit Timer(std::map<std::string, double>& sink, std::string stage)
      : sink_(sink), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}
  ~Timer() { sink_[stage_] += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }
  Timer(const Timer&) = delete;
  Timer& operator=(const Timer&) = delete;

 private:
  std::map<std::string, double>& sink_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

double seed_spread(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// ---------------------------------------------------------------------------
// Per-chain-length data shared by the sweep tasks

struct EnvData {
  int n = 0;
  EigenSystem es;
  EnergyShell shell;
  std::map<Axis, OperatorMatrix> obs;
  std::map<Axis, SmoothCurve> h_curve;
};

// One (N, axis, lambda) sweep point.
struct TaskOutput {
  std::vector<Csv> files;
  std::vector<std::string> q_summary, ratio, coherence, oracle;  // preformatted rows
  std::map<std::string, double> timings;
  std::vector<std::string> warnings;
};

template <typename... Cells>
std::string cells(const Cells&... c) {
  Csv tmp("", "");
  tmp.row(c...);
  const std::string text = tmp.body.str();
  return text.substr(1, text.size() - 2);  // drop the empty header line and trailing newline
}

struct Runner {
  const ExperimentConfig& cfg;
  const EigenCache& cache;

  bool wants(std::string_view s) const { return cfg.has_stage(s); }

  TaskOutput run_point(const EnvData& env, Axis axis, double lam) const {
    TaskOutput out;
    const InteractionSpec is = cfg.model.interaction(lam, axis);
    const QubitParams qubit{cfg.model.delta_s};
    const ChainParams chain = cfg.model.chain(env.n);
    const std::string label = "N" + std::to_string(env.n) + "_" + to_string(axis) + "_lambda" + tag(lam);

    OperatorMatrix h;
    {
      Timer t(out.timings, "build");
      h = build_total_hamiltonian(qubit, chain, is);
    }
    EigenSystem total;
    {
      Timer t(out.timings, "diagonalize");
      total = cache.diagonalize(h, cfg.solver);
    }
    h = OperatorMatrix{};

    if (wants("spectrum")) {
      Csv csv("spectrum_total_" + label + ".csv", "index,energy");
      for (Index i = 0; i < total.size(); ++i) csv.row(static_cast<long long>(i), total.energies(i));
      out.files.push_back(std::move(csv));
    }

    if (wants("q_profile") || wants("ratio")) {
      Timer t(out.timings, "diagnostics");
      const BranchWeights bw = branch_weights(total, env.es, env.shell, qubit);
      for (const auto& w : bw.warnings) out.warnings.push_back(label + ": " + w);
      if (wants("q_profile")) {
        const std::span<const double> energies = as_span(env.es.energies);
        std::array<CoarseProfile, 4> cp;
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) {
            cp[2 * a + b] = coarse_grain(as_span(bw.q_profile[a][b]), energies, cfg.analysis.coarse_window);
          }
        }
        Csv csv("q_profile_" + label + ".csv", "energy,q_a1_b1,q_a1_b2,q_a2_b1,q_a2_b2");
        const auto& grid = cp[0].curve.support;
        for (std::size_t g = 0; g < grid.size(); ++g) {
          csv.row(grid[g], cp[0].curve.values[g], cp[1].curve.values[g], cp[2].curve.values[g], cp[3].curve.values[g]);
        }
        out.files.push_back(std::move(csv));
        for (int a = 1; a <= 2; ++a) {
          for (int b = 1; b <= 2; ++b) {
            const CoarseProfile& p = cp[2 * (a - 1) + (b - 1)];
            const double target = cfg.shell.center + qubit.level(b) - qubit.level(a);
            out.q_summary.push_back(cells(env.n, to_string(axis), lam, a, b, bw.q_sum(a, b), p.center_of_mass,
                                          target, p.half_width));
          }
        }
      }
      if (wants("ratio")) {
        std::vector<double> r1, r2;
        for (std::uint64_t seed : cfg.initial.seeds) {
          const InitialState psi = sample_shell_state(env.es, env.shell, cfg.initial.states.front(), seed);
          const BranchWeights bx = branch_weights_exact(total, env.es, psi, qubit);
          r1.push_back(bx.r(1));
          r2.push_back(bx.r(2));
        }
        auto mean = [](const std::vector<double>& v) {
          double s = 0.0;
          for (double x : v) s += x;
          return s / static_cast<double>(v.size());
        };
        out.ratio.push_back(cells(env.n, to_string(axis), lam, bw.r(1), bw.r(2), bw.q_alpha(0), bw.q_alpha(1),
                                  mean(r1), seed_spread(r1), mean(r2), seed_spread(r2), bw.completeness_deficit));
      }
    }

    if (wants("coherence")) {
      const SmoothCurve& hc = env.h_curve.at(axis);
      const EtaCoefficients eta = eta_coefficients(qubit, is);
      for (const QubitState& c : cfg.initial.states) {
        std::vector<RdmAverage> runs;
        std::vector<double> per_seed;
        double balance = 0.0;
        {
          Timer t(out.timings, "lta");
          for (std::uint64_t seed : cfg.initial.seeds) {
            const InitialState psi = sample_shell_state(env.es, env.shell, c, seed);
            runs.push_back(lta_rdm(total, psi));
            per_seed.push_back(std::abs(runs.back().coherence()));
            const FQuantities fq = f_lta(total, psi, env.obs.at(axis), qubit, is);
            balance = std::max(balance, fq.balance_residual.maxCoeff());
          }
        }
        const RdmAverage avg = average_realizations(runs);
        if (!avg.warnings.empty()) out.warnings.push_back(label + ": " + avg.warnings.front());

        Timer t(out.timings, "theory");
        PredictionInput in{c, hc, cfg.shell.center, cfg.model.delta_s, avg(1, 1).real(), avg(2, 2).real()};
        double h0 = std::nan(""), weak = std::nan(""), inter = std::nan(""), gen = std::nan("");
        bool weak_valid = false, gen_valid = false;
        try {
          h0 = in.h0();
          const Prediction pw = predict_weak(in, eta);
          weak = std::abs(pw.value);
          weak_valid = pw.valid;
          inter = std::abs(predict_intermediate(in, eta).value);
          try {
            gen = std::abs(predict_generic(in, eta).value);
            gen_valid = true;
          } catch (const NearSingularityError& e) {
            out.warnings.push_back(label + ": " + e.what());
          }
        } catch (const ExtrapolationError& e) {
          out.warnings.push_back(label + ": " + e.what());
        }
        out.coherence.push_back(cells(env.n, to_string(axis), lam, cfg.model.f1, cfg.model.f2, c.c1.real(),
                                      c.c1.imag(), c.c2.real(), c.c2.imag(), cfg.initial.seeds.size(),
                                      std::abs(avg.coherence()), seed_spread(per_seed), avg(1, 1).real(),
                                      avg(2, 2).real(), h0, weak, weak_valid, inter, gen, gen_valid, balance));
      }
    }

    if (wants("time_oracle")) {
      Timer t(out.timings, "lta");
      const std::vector<double> times = uniform_time_grid(cfg.analysis.t_max, cfg.analysis.t_points);
      for (std::uint64_t seed : cfg.initial.seeds) {
        const InitialState psi = sample_shell_state(env.es, env.shell, cfg.initial.states.front(), seed);
        const RdmAverage spectral = lta_rdm(total, psi);
        const std::vector<Rdm> series = evolve_rdm(total, psi, times);
        const RdmAverage grid = time_grid_average(series, times, cfg.analysis.t_min, env.shell.count());
        for (const auto& w : grid.warnings) out.warnings.push_back(label + ": " + w);
        out.oracle.push_back(cells(env.n, to_string(axis), lam, seed,
                                   (spectral.matrix - grid.matrix).cwiseAbs().maxCoeff(),
                                   std::abs(spectral.coherence()), std::abs(grid.coherence())));
      }
    }
    return out;
  }
};

void write_file(const std::filesystem::path& dir, const std::string& hash, const Csv& csv) {
  std::ofstream f(dir / csv.file, std::ios::binary);
  if (!f) throw Error("cannot write " + (dir / csv.file).string());
  f << "# config_hash=" << hash << '\n' << csv.body.str();
}

}  // namespace

// ---------------------------------------------------------------------------

ChainParams ModelSection::chain(int n) const {
  ChainParams p;
  p.n_sites = n;
  p.h_x = h_x;
  p.j_z = j_z;
  p.defects = defects;
  p.periodic = periodic;
  return p;
}

InteractionSpec ModelSection::interaction(double lam, Axis axis) const {
  InteractionSpec i;
  i.lambda = lam;
  i.f1 = f1;
  i.f2 = f2;
  i.env_axis = axis;
  i.k = site;
  return i;
}

bool ExperimentConfig::has_stage(std::string_view stage) const {
  return std::find(analysis.stages.begin(), analysis.stages.end(), stage) != analysis.stages.end();
}

void ExperimentConfig::validate() const {
  if (model.n_sites.empty()) bad("model.n_sites", "sweep grid must be nonempty");
  if (model.lambda.empty()) bad("model.interaction.lambda", "sweep grid must be nonempty");
  if (model.axes.empty()) bad("model.interaction.axis", "sweep grid must be nonempty");
  if (initial.seeds.empty()) bad("initial.seeds", "seed list must be nonempty");
  if (initial.states.empty()) bad("initial.states", "state list must be nonempty");
  if (analysis.stages.empty()) bad("analysis.stages", "no stages requested");
  for (const auto& s : analysis.stages) {
    const auto& k = known_stages();
    if (std::find(k.begin(), k.end(), s) == k.end()) bad("analysis.stages", "unknown stage '" + s + "'");
  }
  for (int n : model.n_sites) {
    try {
      model.chain(n).validate();
      model.interaction(0.0, Axis::x).validate(n);
    } catch (const InvalidSiteError&) {
      throw;
    } catch (const Error& e) {
      bad("model", e.what());
    }
  }
  for (std::size_t i = 0; i < initial.states.size(); ++i) {
    try {
      initial.states[i].validate();
    } catch (const Error& e) {
      bad("initial.states[" + std::to_string(i) + "]", e.what());
    }
  }
  if (!(model.delta_s > 0.0)) bad("model.delta_s", "must be positive");
  if (!(shell.width > 0.0)) bad("shell.width", "must be positive");
  if (!(analysis.spacing_fraction > 0.0 && analysis.spacing_fraction <= 1.0)) {
    bad("analysis.spacing_fraction", "must lie in (0, 1]");
  }
  if (analysis.eth_levels < 2) bad("analysis.eth_levels", "must be at least 2");
  if (analysis.histogram_bins < 1) bad("analysis.histogram_bins", "must be positive");
  if (!(analysis.h_window > 0.0)) bad("analysis.h_window", "must be positive");
  if (!(analysis.coarse_window > 0.0)) bad("analysis.coarse_window", "must be positive");
  if (!(analysis.t_max > analysis.t_min) || analysis.t_points < 2) bad("analysis.t_max", "empty time grid");
}

std::string ExperimentConfig::hash() const { return hex16(fnv1a(config_json(*this, false).dump())); }

std::string ExperimentConfig::to_json_text() const { return config_json(*this, true).dump(2); }

ExperimentConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError("<document>", e.what());
  }
  ExperimentConfig c;
  check_keys(j, "", {"name", "description", "model", "shell", "initial", "analysis", "output", "solver"});
  if (j.contains("name")) {
    if (!j["name"].is_string()) bad("name", "expected a string");
    c.name = j["name"].get<std::string>();
  }
  if (j.contains("description")) {
    if (!j["description"].is_string()) bad("description", "expected a string");
    c.description = j["description"].get<std::string>();
  }
  if (j.contains("model")) parse_model(j["model"], c.model);
  if (j.contains("shell")) {
    check_keys(j["shell"], "shell", {"center", "width"});
    if (j["shell"].contains("center")) c.shell.center = get_number(j["shell"]["center"], "shell.center");
    if (j["shell"].contains("width")) c.shell.width = get_number(j["shell"]["width"], "shell.width");
  }
  if (j.contains("initial")) parse_initial(j["initial"], c.initial);
  if (j.contains("analysis")) parse_analysis(j["analysis"], c.analysis);
  if (j.contains("output")) {
    check_keys(j["output"], "output", {"directory"});
    if (j["output"].contains("directory")) {
      if (!j["output"]["directory"].is_string()) bad("output.directory", "expected a string");
      c.output.directory = j["output"]["directory"].get<std::string>();
    }
  }
  if (j.contains("solver")) {
    check_keys(j["solver"], "solver", {"dense_limit", "hermitian_tol"});
    if (j["solver"].contains("dense_limit")) c.solver.dense_limit = get_int(j["solver"]["dense_limit"], "solver.dense_limit");
    if (j["solver"].contains("hermitian_tol")) {
      c.solver.hermitian_tol = get_number(j["solver"]["hermitian_tol"], "solver.hermitian_tol");
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream f(file, std::ios::binary);
  if (!f) throw ConfigurationError("cannot open config " + file.string());
  std::ostringstream s;
  s << f.rdbuf();
  return parse_config(s.str());
}

const std::vector<std::string>& known_stages() {
  static const std::vector<std::string> s{"operators", "spectrum", "spacing", "diagonal", "eth",
                                          "offdiag", "q_profile", "ratio", "coherence", "time_oracle"};
  return s;
}

std::string RunManifest::to_json_text() const {
  json t = json::array();
  for (const auto& s : timings) t.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
  json j = {{"config_name", config_name},
            {"config_hash", config_hash},
            {"seeds", seeds},
            {"solver", {{"dense_limit", solver.dense_limit}, {"hermitian_tol", solver.hermitian_tol}}},
            {"version", version},
            {"threads", threads},
            {"wall_clock", t},
            {"output_files", output_files},
            {"warnings", warnings},
            {"cache", {{"hits", cache_hits}, {"misses", cache_misses}}}};
  return j.dump(2);
}

RunManifest run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const EigenCache cache = EigenCache::from_environment(options.cache_dir);
  if (cache.enabled()) std::filesystem::create_directories(cache.directory());
  const std::filesystem::path dir = cfg.output.directory;
  std::filesystem::create_directories(dir);

  RunManifest manifest;
  manifest.config_name = cfg.name;
  manifest.config_hash = cfg.hash();
  manifest.seeds = cfg.initial.seeds;
  manifest.solver = cfg.solver;
  manifest.version = kLibraryVersion;
  manifest.threads = std::max(1, options.threads);

  std::map<std::string, double> timings;
  std::vector<Csv> files;
  auto emit = [&](Csv&& csv) { files.push_back(std::move(csv)); };

  if (cfg.has_stage("operators")) {
    Timer t(timings, "build");
    Csv csv("operators.csv", "n_sites,axis,lambda,dimension,nonzeros,hermiticity_defect,frobenius_norm");
    for (int n : cfg.model.n_sites) {
      for (Axis axis : cfg.model.axes) {
        for (double lam : cfg.model.lambda) {
          const SparseOperator h = build_total_hamiltonian_sparse(QubitParams{cfg.model.delta_s},
                                                                  cfg.model.chain(n), cfg.model.interaction(lam, axis));
          const SparseMatrix ht = h.entries.transpose();
          csv.row(n, to_string(axis), lam, static_cast<long long>(h.dimension()),
                  static_cast<long long>(h.entries.nonZeros()), (h.entries - ht).norm(), h.entries.norm());
        }
      }
    }
    emit(std::move(csv));
  }

  const bool need_env = std::any_of(cfg.analysis.stages.begin(), cfg.analysis.stages.end(), [](const std::string& s) {
    return env_stages().count(s) > 0 || total_stages().count(s) > 0;
  });
  const bool need_total = std::any_of(cfg.analysis.stages.begin(), cfg.analysis.stages.end(),
                                      [](const std::string& s) { return total_stages().count(s) > 0; });

  Csv spacing_summary("spacing_summary.csv", "n_sites,levels,mean,ks_wigner,ks_poisson");
  Csv eth("eth_scaling.csv", "n_sites,axis,site,levels,e_lo,e_hi,mu,sigma_d,sigma_nd,ks_gauss");
  Csv q_summary("q_summary.csv", "n_sites,axis,lambda,alpha,beta,q_sum,center_of_mass,target,half_width");
  Csv ratio("ratio.csv",
            "n_sites,axis,lambda,r1,r2,q_alpha1,q_alpha2,r1_seed_mean,r1_seed_spread,r2_seed_mean,r2_seed_spread,"
            "completeness_deficit");
  Csv coherence("coherence.csv",
                "n_sites,axis,lambda,f1,f2,c1_re,c1_im,c2_re,c2_im,seeds,rho12_abs,rho12_abs_seed_spread,rho11,rho22,"
                "h0,weak,weak_valid,intermediate,generic,generic_valid,balance_residual");
  Csv oracle("time_oracle.csv", "n_sites,axis,lambda,seed,max_abs_diff,rho12_abs_spectral,rho12_abs_time");

  const Runner runner{cfg, cache};
  std::vector<Csv> point_files;

  for (int n : cfg.model.n_sites) {
    if (!need_env) break;
    EnvData env;
    env.n = n;
    {
      Timer t(timings, "diagonalize");
      env.es = cache.diagonalize(build_env_hamiltonian(cfg.model.chain(n)), cfg.solver);
    }
    env.shell = EnergyShell::build(env.es, cfg.shell.center, cfg.shell.width);
    for (Axis a : cfg.model.axes) env.obs.emplace(a, build_local_pauli(n, cfg.model.site, a));
    const std::string tagn = "N" + std::to_string(n);

    {
      Timer t(timings, "diagnostics");
      if (cfg.has_stage("spectrum")) {
        Csv csv("spectrum_" + tagn + ".csv", "index,energy");
        for (Index i = 0; i < env.es.size(); ++i) csv.row(static_cast<long long>(i), env.es.energies(i));
        emit(std::move(csv));
      }
      if (cfg.has_stage("spacing")) {
        const std::vector<double> mid = middle_fraction(as_span(env.es.energies), cfg.analysis.spacing_fraction);
        const UnfoldedSpectrum u = unfold_spectrum(mid);
        const SpacingStats st = spacing_distribution(u.spacings);
        Csv csv("spacings_" + tagn + ".csv", "index,s");
        for (std::size_t i = 0; i < u.spacings.size(); ++i) csv.row(i, u.spacings[i]);
        emit(std::move(csv));
        spacing_summary.row(n, mid.size(), st.mean, st.ks_wigner, st.ks_poisson);
      }
      if (cfg.has_stage("diagonal")) {
        std::string header = "energy";
        for (Axis a : cfg.model.axes) header += ",o" + to_string(a) + "_diag";
        Csv csv("diagonal_" + tagn + ".csv", header);
        std::vector<Eigen::VectorXd> diag;
        for (Axis a : cfg.model.axes) {
          diag.push_back((env.obs.at(a).entries * env.es.vectors).cwiseProduct(env.es.vectors).colwise().sum().transpose());
        }
        for (Index i = 0; i < env.es.size(); ++i) {
          std::ostringstream line;
          line << num(env.es.energies(i));
          for (const auto& d : diag) line << ',' << num(d(i));
          csv.body << line.str() << '\n';
        }
        emit(std::move(csv));
      }
      if (cfg.has_stage("eth") || cfg.has_stage("offdiag")) {
        const EigenSystem near = window_select_nearest(env.es, cfg.shell.center, cfg.analysis.eth_levels);
        const SpectralWindow w = *near.window;
        for (Axis a : cfg.model.axes) {
          const EthStats d = eth_diagonal_stats(env.es, env.obs.at(a), w, cfg.analysis.eth_levels);
          const EthStats o = eth_offdiag_stats(env.es, env.obs.at(a), w, cfg.analysis.eth_levels);
          if (cfg.has_stage("eth")) {
            eth.row(n, to_string(a), cfg.model.site, static_cast<long long>(d.level_count), w.lo, w.hi, d.mu,
                    d.sigma_d, o.sigma_nd, o.ks_gauss);
          }
          if (cfg.has_stage("offdiag")) {
            const int bins = cfg.analysis.histogram_bins;
            const double lo = -5.0, hi = 5.0, width = (hi - lo) / bins;
            std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
            for (double x : o.offdiag_samples) {
              const auto b = static_cast<long>(std::floor((x - lo) / width));
              if (b >= 0 && b < bins) counts[static_cast<std::size_t>(b)] += 1.0;
            }
            Csv csv("offdiag_hist_" + tagn + "_" + to_string(a) + ".csv", "bin_center,density,normal_pdf");
            const double total = static_cast<double>(o.offdiag_samples.size());
            for (int b = 0; b < bins; ++b) {
              const double x = lo + (b + 0.5) * width;
              csv.row(x, counts[static_cast<std::size_t>(b)] / (total * width),
                      std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI));
            }
            emit(std::move(csv));
          }
        }
      }
    }

    if (!need_total) continue;
    if (cfg.has_stage("coherence")) {
      for (Axis a : cfg.model.axes) {
        env.h_curve.emplace(a, smooth_h_of_E(env.es, env.obs.at(a), cfg.analysis.h_window));
      }
    }
    if (!env.shell.statistically_valid()) {
      manifest.warnings.push_back(tagn + ": energy shell holds " + std::to_string(env.shell.count()) +
                                  " levels (< 30); shell averages are noisy");
    }

    // Sweep points of this chain length run as independent tasks.
    std::vector<std::pair<Axis, double>> points;
    for (Axis a : cfg.model.axes) {
      for (double lam : cfg.model.lambda) points.emplace_back(a, lam);
    }
    std::vector<TaskOutput> results(points.size());
    std::vector<std::exception_ptr> errors(points.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t p = next++; p < points.size(); p = next++) {
        try {
          results[p] = runner.run_point(env, points[p].first, points[p].second);
        } catch (...) {
          errors[p] = std::current_exception();
        }
      }
    };
    const int nthreads = std::min<int>(manifest.threads, static_cast<int>(points.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    for (auto& r : results) {
      for (auto& f : r.files) point_files.push_back(std::move(f));
      for (const auto& row : r.q_summary) q_summary.body << row << '\n';
      for (const auto& row : r.ratio) ratio.body << row << '\n';
      for (const auto& row : r.coherence) coherence.body << row << '\n';
      for (const auto& row : r.oracle) oracle.body << row << '\n';
      for (const auto& [stage, sec] : r.timings) timings[stage] += sec;
      manifest.warnings.insert(manifest.warnings.end(), r.warnings.begin(), r.warnings.end());
    }
  }

  for (auto& f : point_files) emit(std::move(f));
  if (cfg.has_stage("spacing")) emit(std::move(spacing_summary));
  if (cfg.has_stage("eth")) emit(std::move(eth));
  if (cfg.has_stage("q_profile")) emit(std::move(q_summary));
  if (cfg.has_stage("ratio")) emit(std::move(ratio));
  if (cfg.has_stage("coherence")) emit(std::move(coherence));
  if (cfg.has_stage("time_oracle")) emit(std::move(oracle));

  for (const auto& f : files) {
    write_file(dir, manifest.config_hash, f);
    manifest.output_files.push_back(f.file);
  }
  for (const auto& s : {"build", "diagonalize", "diagnostics", "lta", "theory"}) {
    if (timings.count(s)) manifest.timings.push_back({s, timings[s]});
  }
  manifest.output_files.push_back("config.json");
  manifest.cache_hits = cache.hits();
  manifest.cache_misses = cache.misses();
  {
    std::ofstream f(dir / "manifest.json", std::ios::binary);
    f << manifest.to_json_text() << '\n';
  }
  {
    std::ofstream f(dir / "config.json", std::ios::binary);
    f << cfg.to_json_text() << '\n';
  }
  return manifest;
}

}  // namespace qcoh
