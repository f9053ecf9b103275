// ordprobit: simulate ordinal data, fit the multivariate ordered probit model
// by maximum pairwise likelihood, run replicated coverage studies and
// benchmark the analytic score against finite differences.
//
// Exit codes: 0 success (including non-converged fits), 2 usage or input
// validation error, 1 runtime failure.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ordprobit/io.hpp"
#include "ordprobit/ordprobit.hpp"

namespace op = ordprobit;
using op::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Writes through a temporary file so a failed run never leaves a partial output.
void write_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path);
  }
  std::filesystem::rename(tmp, path);
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    write_file(path, content);
  }
}

json manifest(const std::string& command, const std::vector<std::string>& args, const json& config,
              std::uint64_t seed) {
  return json{{"command", command},
              {"version", op::kVersion},
              {"seed", seed},
              {"args", args},
              {"config", config}};
}

/// Wall-clock timings go to a sidecar so the primary outputs stay byte-stable.
void write_timings(const std::string& out_path, const json& timings) {
  if (out_path.empty() || out_path == "-") {
    std::cerr << "timings: " << timings.dump() << "\n";
    return;
  }
  write_file(out_path + ".timings.json", timings.dump(2) + "\n");
}

std::vector<std::vector<double>> parse_menu(const std::string& text) {
  std::vector<std::vector<double>> menu;
  std::stringstream groups(text);
  std::string group;
  while (std::getline(groups, group, ';')) {
    std::vector<double> v;
    std::stringstream items(group);
    std::string item;
    while (std::getline(items, item, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(item, &used));
        if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw UsageError("--thresholds: cannot parse '" + item + "'");
      }
    }
    menu.push_back(std::move(v));
  }
  return menu;
}

/// Equiprobable cut-points norm_quantile(k / K).
std::vector<double> equiprobable_thresholds(int K) {
  std::vector<double> t;
  for (int k = 1; k < K; ++k) t.push_back(op::norm_quantile(static_cast<double>(k) / K));
  return t;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-', 1);
    try {
      if (dash != std::string::npos) {
        const int lo = std::stoi(item.substr(0, dash));
        const int hi = std::stoi(item.substr(dash + 1));
        if (hi < lo) throw std::invalid_argument(item);
        for (int v = lo; v <= hi; ++v) out.push_back(v);
      } else {
        out.push_back(std::stoi(item));
      }
    } catch (const std::exception&) {
      throw UsageError("cannot parse integer list entry '" + item + "'");
    }
  }
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  int q = 0;
  int K = 0;
  int n = 0;
  double zero_fraction = 0.3;
  std::uint64_t seed = 1;
  std::string thresholds;
  std::string out;
  std::string truth;
};

int run_simulate(const SimulateOptions& o, const std::vector<std::string>& args) {
  const auto t0 = Clock::now();
  std::vector<std::vector<double>> menu;
  if (!o.thresholds.empty()) {
    menu = parse_menu(o.thresholds);
  } else if (o.K == 4) {
    menu = {{0.0, 0.5, 1.0}, {-1.0, 0.0, 1.0}};
  } else {
    menu = {equiprobable_thresholds(o.K)};
  }
  op::StudyConfig design;
  design.q = o.q;
  design.K = o.K;
  design.sample_sizes = {o.n};
  design.replicates = 1;
  design.zero_fraction = o.zero_fraction;
  design.threshold_menu = menu;
  design.seed = o.seed;
  try {
    design.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const op::Theta truth = op::draw_study_truth(design);
  op::Rng rng = op::make_stream(o.seed, 1, 0);
  const op::OrdinalDataset data = op::sample_dataset(truth.correlations(), truth.thresholds(), o.n, rng);
  const double t_sim = seconds_since(t0);

  const json config{{"q", o.q},         {"K", o.K},          {"n", o.n},
                    {"zero_fraction", o.zero_fraction},    {"seed", o.seed},
                    {"threshold_menu", menu}};
  json truth_doc;
  truth_doc["manifest"] = manifest("simulate", args, config, o.seed);
  truth_doc["n"] = o.n;
  truth_doc.update(op::truth_to_json(truth));
  const std::string truth_path = o.truth.empty() ? o.out + ".truth.json" : o.truth;

  write_file(o.out, op::format_dataset_csv(data));
  write_file(truth_path, truth_doc.dump(2) + "\n");
  write_timings(o.out, json{{"simulate_seconds", t_sim}, {"total_seconds", seconds_since(t0)}});
  std::cerr << "wrote " << o.out << " (" << data.n() << " x " << data.q() << ") and " << truth_path
            << "\n";
  return 0;
}

// --------------------------------------------------------------------- fit

struct FitOptions {
  std::string data;
  int K = 0;
  double level = 0.95;
  std::string out;
  op::FitConfig fit;
  std::string gradient = "analytic";
};

int run_fit(FitOptions o, const std::vector<std::string>& args) {
  const auto t0 = Clock::now();
  o.fit.gradient = o.gradient == "analytic" ? op::GradientMode::analytic
                                            : op::GradientMode::finite_difference;
  try {
    o.fit.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const op::OrdinalDataset data = op::read_dataset_csv(o.data, o.K);
  const op::PairCounts counts = op::compute_counts(data);
  const double t_read = seconds_since(t0);

  const auto t1 = Clock::now();
  const op::FitResult fit = op::maximize(counts, data, o.fit);
  const double t_fit = seconds_since(t1);
  if (!fit.converged) {
    std::cerr << "warning: optimizer did not converge (" << fit.message
              << "); gradient norm " << fit.gradient_norm << "\n";
  }
  if (!fit.sigma_pd) std::cerr << "warning: fitted correlation matrix is not positive definite\n";
  if (fit.underflow_count > 0) {
    std::cerr << "warning: " << fit.underflow_count
              << " observed cells have probability below the floor at the estimate\n";
  }

  const auto t2 = Clock::now();
  std::optional<op::GodambeMatrices> g;
  std::optional<std::vector<op::WaldInterval>> intervals;
  try {
    g = op::godambe(fit.theta_hat, data, counts);
    if (g->pseudo_inverse_used) std::cerr << "warning: J is ill-conditioned; used pseudo-inverse\n";
    intervals = op::wald_intervals(fit.theta_hat, g->G_hat, data.n(), o.level);
  } catch (const op::GodambeError& e) {
    std::cerr << "warning: no standard errors: " << e.what() << "\n";
  }
  const double t_godambe = seconds_since(t2);

  const json config{{"data", o.data}, {"K", data.K()}, {"level", o.level},
                    {"fit", op::fit_config_to_json(o.fit)}};
  json report;
  report["manifest"] = manifest("fit", args, config, 0);
  report.update(op::fit_report(fit, g ? &*g : nullptr, intervals ? &*intervals : nullptr, o.level,
                               data.n()));
  emit(o.out, report.dump(2) + "\n");
  write_timings(o.out, json{{"read_seconds", t_read},
                            {"fit_seconds", t_fit},
                            {"godambe_seconds", t_godambe},
                            {"total_seconds", seconds_since(t0)}});
  return 0;
}

// ------------------------------------------------------------------- study

struct StudyOptions {
  std::string config;
  std::string out;
  bool serial = false;
  int threads = -1;
};

int run_study_cmd(const StudyOptions& o, const std::vector<std::string>& args) {
  const auto t0 = Clock::now();
  std::ifstream in(o.config);
  if (!in) throw UsageError("cannot open study configuration " + o.config);
  json cfg_json;
  try {
    cfg_json = json::parse(in);
  } catch (const json::parse_error& e) {
    throw op::FormatError(o.config + ": " + e.what());
  }
  op::StudyConfig cfg = op::study_config_from_json(cfg_json);
  if (o.threads >= 0) cfg.threads = o.threads;
  if (o.serial) cfg.threads = 1;

  const op::StudyResult result = op::run_study(cfg);
  json report;
  report["manifest"] = manifest("study", args, op::study_config_to_json(cfg), cfg.seed);
  report.update(op::study_report(cfg, result));
  emit(o.out, report.dump(2) + "\n");
  for (const auto& sc : result.scenarios) {
    std::cerr << "n=" << sc.n << ": usable " << sc.usable << "/" << cfg.replicates
              << ", pooled correlation coverage "
              << op::pooled_correlation_mean(sc.coverage, result.truth.dims()) << "\n";
  }
  write_timings(o.out, json{{"total_seconds", seconds_since(t0)}});
  return 0;
}

// -------------------------------------------------------------- bench-grad

struct BenchOptions {
  std::string qs = "3-12";
  int n = 50;
  int K = 5;
  int reps = 5;
  std::uint64_t seed = 1;
  std::string out;
};

int run_bench(const BenchOptions& o, const std::vector<std::string>& args) {
  const std::vector<int> qs = parse_int_list(o.qs);
  if (qs.empty()) throw UsageError("--q list is empty");
  for (int q : qs)
    if (q < 2) throw UsageError("every q must be >= 2");

  std::ostringstream csv;
  csv.precision(10);
  csv << "q,n,K,params,analytic_median_s,numeric_median_s,speedup,max_abs_discrepancy,"
         "max_rel_discrepancy\n";
  for (int q : qs) {
    op::StudyConfig design;
    design.q = q;
    design.K = o.K;
    design.threshold_menu = {equiprobable_thresholds(o.K)};
    design.seed = o.seed + static_cast<std::uint64_t>(q);
    const op::Theta truth = op::draw_study_truth(design);
    op::Rng rng = op::make_stream(design.seed, 1, 0);
    const auto data = op::sample_dataset(truth.correlations(), truth.thresholds(), o.n, rng);
    const auto counts = op::compute_counts(data);

    std::vector<double> t_analytic, t_numeric;
    Eigen::VectorXd analytic, numeric;
    for (int rep = 0; rep < o.reps; ++rep) {
      auto t0 = Clock::now();
      analytic = op::pairwise_score(truth, counts);
      t_analytic.push_back(seconds_since(t0));
      t0 = Clock::now();
      numeric = op::finite_difference_score(truth, counts);
      t_numeric.push_back(seconds_since(t0));
    }
    const double abs_disc = (analytic - numeric).lpNorm<Eigen::Infinity>();
    const double rel_disc = abs_disc / std::max(numeric.lpNorm<Eigen::Infinity>(), 1e-300);
    const double ta = median(t_analytic);
    const double tn = median(t_numeric);
    csv << q << ',' << o.n << ',' << o.K << ',' << truth.size() << ',' << ta << ',' << tn << ','
        << tn / ta << ',' << abs_disc << ',' << rel_disc << '\n';
  }
  emit(o.out, csv.str());
  if (!o.out.empty() && o.out != "-") {
    const json config{{"q", qs}, {"n", o.n}, {"K", o.K}, {"reps", o.reps}, {"seed", o.seed}};
    write_file(o.out + ".manifest.json",
               json{{"manifest", manifest("bench-grad", args, config, o.seed)}}.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int dispatch(std::vector<std::string> argv_in);

namespace {

int run_replay(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open manifest source " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw op::FormatError(path + ": " + e.what());
  }
  const json& m = doc.contains("manifest") ? doc.at("manifest") : doc;
  if (!m.contains("command") || !m.contains("args")) {
    throw op::FormatError(path + ": no manifest with 'command' and 'args'");
  }
  std::vector<std::string> args = m.at("args").get<std::vector<std::string>>();
  // Drop options that are overridden, then append the overrides.
  for (std::size_t i = 0; i + 1 < overrides.size(); i += 2) {
    for (std::size_t a = 0; a + 1 < args.size();) {
      if (args[a] == overrides[i]) {
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(a),
                   args.begin() + static_cast<std::ptrdiff_t>(a) + 2);
      } else {
        ++a;
      }
    }
    args.push_back(overrides[i]);
    args.push_back(overrides[i + 1]);
  }
  std::vector<std::string> argv{"ordprobit", m.at("command").get<std::string>()};
  argv.insert(argv.end(), args.begin(), args.end());
  return dispatch(std::move(argv));
}

}  // namespace

int dispatch(std::vector<std::string> argv_in) {
  CLI::App app{"Pairwise likelihood estimation for the multivariate ordered probit model"};
  app.require_subcommand(1);
  app.set_version_flag("--version", op::kVersion);

  SimulateOptions sim;
  auto* c_sim = app.add_subcommand("simulate", "Simulate an ordinal dataset and its true parameters");
  c_sim->add_option("--q", sim.q, "Number of margins")->required()->check(CLI::Range(2, 1000));
  c_sim->add_option("--k", sim.K, "Categories per margin")->required()->check(CLI::Range(2, 1000));
  c_sim->add_option("--n", sim.n, "Number of observations")->required()->check(CLI::PositiveNumber);
  c_sim->add_option("--zero-frac", sim.zero_fraction, "Fraction of exactly-zero correlations")
      ->check(CLI::Range(0.0, 0.999999));
  c_sim->add_option("--seed", sim.seed, "Random seed");
  c_sim->add_option("--thresholds", sim.thresholds,
                    "Threshold menu, e.g. \"0,0.5,1;-1,0,1\" (default: those two for K=4, "
                    "equiprobable cut-points otherwise)");
  c_sim->add_option("--out", sim.out, "Dataset CSV path")->required();
  c_sim->add_option("--truth", sim.truth, "Truth JSON path (default <out>.truth.json)");

  FitOptions fit;
  auto* c_fit = app.add_subcommand("fit", "Fit a dataset by maximum pairwise likelihood");
  c_fit->add_option("--data", fit.data, "Dataset CSV path")->required();
  c_fit->add_option("--k", fit.K, "Categories per margin (default: largest observed)");
  c_fit->add_option("--level", fit.level, "Confidence level")->check(CLI::Range(1e-9, 1.0 - 1e-9));
  c_fit->add_option("--out", fit.out, "Report path (default: stdout)");
  c_fit->add_option("--max-iter", fit.fit.max_iterations, "Iteration cap")->check(CLI::PositiveNumber);
  c_fit->add_option("--grad-tol", fit.fit.gradient_tolerance, "Gradient tolerance (per observation)");
  c_fit->add_option("--obj-tol", fit.fit.objective_tolerance, "Relative objective tolerance");
  c_fit->add_option("--rho-bound", fit.fit.rho_bound, "Box bound on |rho|");
  c_fit->add_option("--gradient", fit.gradient, "analytic or finite_difference")
      ->check(CLI::IsMember({"analytic", "finite_difference"}));

  StudyOptions study;
  auto* c_study = app.add_subcommand("study", "Run a replicated simulation study");
  c_study->add_option("--config", study.config, "Study configuration (JSON)")->required();
  c_study->add_option("--out", study.out, "Report path (default: stdout)");
  c_study->add_flag("--serial", study.serial, "Run replicates serially");
  c_study->add_option("--threads", study.threads, "Worker threads (0: hardware)")
      ->check(CLI::NonNegativeNumber);

  BenchOptions bench;
  auto* c_bench = app.add_subcommand("bench-grad", "Time analytic vs finite-difference scores");
  c_bench->add_option("--q", bench.qs, "Dimensions, e.g. 3-12 or 3,5,8");
  c_bench->add_option("--n", bench.n, "Sample size")->check(CLI::PositiveNumber);
  c_bench->add_option("--k", bench.K, "Categories")->check(CLI::Range(2, 1000));
  c_bench->add_option("--reps", bench.reps, "Timing repetitions")->check(CLI::PositiveNumber);
  c_bench->add_option("--seed", bench.seed, "Random seed");
  c_bench->add_option("--out", bench.out, "CSV path (default: stdout)");

  std::string replay_path, replay_out, replay_truth;
  auto* c_replay = app.add_subcommand("replay", "Re-run a command from an embedded manifest");
  c_replay->add_option("source", replay_path, "Report, truth or manifest JSON")->required();
  c_replay->add_option("--out", replay_out, "Write the primary output here instead");
  c_replay->add_option("--truth", replay_truth, "Write the truth file here instead (simulate)");

  std::vector<std::string> sub_args(argv_in.begin() + std::min<std::size_t>(2, argv_in.size()),
                                    argv_in.end());
  try {
    std::vector<std::string> reversed(argv_in.rbegin(), argv_in.rend() - 1);
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*c_sim) return run_simulate(sim, sub_args);
    if (*c_fit) return run_fit(fit, sub_args);
    if (*c_study) return run_study_cmd(study, sub_args);
    if (*c_bench) return run_bench(bench, sub_args);
    if (*c_replay) {
      std::vector<std::string> overrides;
      if (!replay_out.empty()) overrides.insert(overrides.end(), {"--out", replay_out});
      if (!replay_truth.empty()) overrides.insert(overrides.end(), {"--truth", replay_truth});
      return run_replay(replay_path, overrides);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const op::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int main(int argc, char** argv) {
  return dispatch(std::vector<std::string>(argv, argv + argc));
}
