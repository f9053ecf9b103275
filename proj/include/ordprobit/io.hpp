// Dataset CSV files, JSON study configuration and JSON reports.
//
// Dataset format: headerless CSV of integers, one observation per line,
// one column per margin, categories 1..K. Blank lines are ignored.
#pragma once

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ordprobit/counts.hpp"
#include "ordprobit/fit.hpp"
#include "ordprobit/godambe.hpp"
#include "ordprobit/model.hpp"
#include "ordprobit/simulate.hpp"

namespace ordprobit {

inline constexpr const char* kVersion = "0.1.0";

using json = nlohmann::ordered_json;

/// Malformed input file; the message names the offending line or key.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses dataset CSV text. K <= 0 means "largest observed category".
inline OrdinalDataset parse_dataset_csv(std::istream& in, int K = 0) {
  std::vector<int> values;
  std::vector<int> line_of_row;
  int width = -1;
  int rows = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    int fields = 0;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      std::string_view field = rest.substr(0, comma);
      while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
      while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
      int v = 0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
        throw FormatError("line " + std::to_string(line_no) + ": field " +
                          std::to_string(fields + 1) + " is not an integer: '" +
                          std::string(field) + "'");
      }
      if (v < 1) {
        throw FormatError("line " + std::to_string(line_no) + ": category " + std::to_string(v) +
                          " must be >= 1");
      }
      values.push_back(v);
      ++fields;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (width < 0) width = fields;
    if (fields != width) {
      throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                        " fields, found " + std::to_string(fields));
    }
    line_of_row.push_back(line_no);
    ++rows;
  }
  if (rows == 0) throw FormatError("dataset is empty");
  if (width < 2) throw FormatError("dataset needs at least 2 columns");
  CategoryMatrix m(rows, width);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < width; ++j) m(i, j) = values[static_cast<std::size_t>(i) * width + j];
  const int observed_max = m.maxCoeff();
  if (K <= 0) K = std::max(2, observed_max);
  if (observed_max > K) {
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < width; ++j)
        if (m(i, j) > K) {
          throw FormatError("line " + std::to_string(line_of_row[i]) + ": category " +
                            std::to_string(m(i, j)) + " exceeds K=" + std::to_string(K));
        }
  }
  return OrdinalDataset(std::move(m), K);
}

inline OrdinalDataset read_dataset_csv(const std::string& path, int K = 0) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file " + path);
  return parse_dataset_csv(in, K);
}

inline std::string format_dataset_csv(const OrdinalDataset& data) {
  std::string out;
  out.reserve(static_cast<std::size_t>(data.n()) * data.q() * 2);
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.q(); ++j) {
      if (j) out += ',';
      out += std::to_string(data(i, j));
    }
    out += '\n';
  }
  return out;
}

/// Human-readable, 1-based labels in theta order: "rho[1,2]", "a[1](3)".
inline std::vector<std::string> parameter_names(const ModelDims& dims) {
  std::vector<std::string> names;
  names.reserve(dims.num_params());
  for (int r = 0; r < dims.q; ++r)
    for (int s = r + 1; s < dims.q; ++s)
      names.push_back("rho[" + std::to_string(r + 1) + "," + std::to_string(s + 1) + "]");
  for (int j = 0; j < dims.q; ++j)
    for (int k = 1; k < dims.K; ++k)
      names.push_back("a[" + std::to_string(k) + "](" + std::to_string(j + 1) + ")");
  return names;
}

inline json to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline json to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

inline json named_values(const ModelDims& dims, const Eigen::VectorXd& v) {
  const auto names = parameter_names(dims);
  json out = json::object();
  for (std::size_t t = 0; t < names.size(); ++t) out[names[t]] = v[static_cast<Eigen::Index>(t)];
  return out;
}

inline json truth_to_json(const Theta& truth) {
  json out;
  out["q"] = truth.dims().q;
  out["K"] = truth.dims().K;
  out["sigma"] = to_json(truth.correlations().matrix());
  out["thresholds"] = to_json(truth.thresholds().cuts());
  out["theta"] = named_values(truth.dims(), truth.values());
  return out;
}

inline Theta truth_from_json(const json& j) {
  const Eigen::Index q = j.at("sigma").size();
  Eigen::MatrixXd sigma(q, q);
  for (Eigen::Index r = 0; r < q; ++r)
    for (Eigen::Index s = 0; s < q; ++s) sigma(r, s) = j.at("sigma").at(r).at(s).get<double>();
  const auto& th = j.at("thresholds");
  Eigen::MatrixXd cuts(q, static_cast<Eigen::Index>(th.at(0).size()));
  for (Eigen::Index r = 0; r < q; ++r)
    for (Eigen::Index k = 0; k < cuts.cols(); ++k) cuts(r, k) = th.at(r).at(k).get<double>();
  return Theta(CorrelationParams::from_matrix(sigma), ThresholdSet(std::move(cuts)));
}

inline json fit_config_to_json(const FitConfig& c) {
  return json{{"max_iterations", c.max_iterations},
              {"gradient_tolerance", c.gradient_tolerance},
              {"objective_tolerance", c.objective_tolerance},
              {"rho_bound", c.rho_bound},
              {"gradient", c.gradient == GradientMode::analytic ? "analytic" : "finite_difference"}};
}

inline FitConfig fit_config_from_json(const json& j) {
  FitConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "max_iterations") c.max_iterations = value.get<int>();
    else if (key == "gradient_tolerance") c.gradient_tolerance = value.get<double>();
    else if (key == "objective_tolerance") c.objective_tolerance = value.get<double>();
    else if (key == "rho_bound") c.rho_bound = value.get<double>();
    else if (key == "gradient") {
      const auto mode = value.get<std::string>();
      if (mode == "analytic") c.gradient = GradientMode::analytic;
      else if (mode == "finite_difference") c.gradient = GradientMode::finite_difference;
      else throw FormatError("fit.gradient must be 'analytic' or 'finite_difference'");
    } else {
      throw FormatError("unknown fit configuration key '" + key + "'");
    }
  }
  return c;
}

inline json study_config_to_json(const StudyConfig& c) {
  return json{{"q", c.q},
              {"K", c.K},
              {"sample_sizes", c.sample_sizes},
              {"replicates", c.replicates},
              {"level", c.level},
              {"zero_fraction", c.zero_fraction},
              {"threshold_menu", c.threshold_menu},
              {"seed", c.seed},
              {"threads", c.threads},
              {"fit", fit_config_to_json(c.fit)}};
}

inline StudyConfig study_config_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("study configuration must be a JSON object");
  StudyConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "q") c.q = value.get<int>();
      else if (key == "K") c.K = value.get<int>();
      else if (key == "sample_sizes") c.sample_sizes = value.get<std::vector<int>>();
      else if (key == "replicates") c.replicates = value.get<int>();
      else if (key == "level") c.level = value.get<double>();
      else if (key == "zero_fraction") c.zero_fraction = value.get<double>();
      else if (key == "threshold_menu") c.threshold_menu = value.get<std::vector<std::vector<double>>>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "threads") c.threads = value.get<int>();
      else if (key == "fit") c.fit = fit_config_from_json(value);
      else throw FormatError("unknown study configuration key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("study configuration: ") + e.what());
  }
  c.validate();
  return c;
}

inline json fit_report(const FitResult& fit, const GodambeMatrices* godambe,
                       const std::vector<WaldInterval>* intervals, double level, int n) {
  const ModelDims& dims = fit.theta_hat.dims();
  json out;
  out["n"] = n;
  out["q"] = dims.q;
  out["K"] = dims.K;
  out["diagnostics"] = json{{"converged", fit.converged},
                            {"message", fit.message},
                            {"iterations", fit.iterations},
                            {"loglik", fit.loglik},
                            {"initial_loglik", fit.initial_loglik},
                            {"gradient_norm", fit.gradient_norm},
                            {"sigma_pd", fit.sigma_pd},
                            {"underflow_count", fit.underflow_count},
                            {"underflow_evaluations", fit.underflow_evaluations}};
  out["level"] = level;
  out["z_multiplier"] = norm_quantile(1.0 - 0.5 * (1.0 - level));
  const auto names = parameter_names(dims);
  json params = json::array();
  for (std::size_t t = 0; t < names.size(); ++t) {
    json p{{"name", names[t]}, {"estimate", fit.theta_hat[static_cast<Eigen::Index>(t)]}};
    if (intervals) {
      const WaldInterval& w = (*intervals)[t];
      p["std_error"] = w.std_error;
      p["lower"] = w.lower;
      p["upper"] = w.upper;
    }
    params.push_back(std::move(p));
  }
  out["parameters"] = std::move(params);
  out["psi_hat"] = to_json(fit.psi_hat.values());
  if (godambe) {
    out["godambe"] = json{{"pseudo_inverse_used", godambe->pseudo_inverse_used},
                          {"j_condition", godambe->j_condition},
                          {"J_hat", to_json(godambe->J_hat)},
                          {"H_hat", to_json(godambe->H_hat)},
                          {"G_hat", to_json(godambe->G_hat)}};
  }
  return out;
}

inline json study_report(const StudyConfig& config, const StudyResult& result) {
  const ModelDims& dims = result.truth.dims();
  const auto names = parameter_names(dims);
  json out;
  out["truth"] = truth_to_json(result.truth);
  json scenarios = json::array();
  for (const auto& sc : result.scenarios) {
    json s;
    s["n"] = sc.n;
    s["replicates"] = config.replicates;
    s["usable"] = sc.usable;
    s["excluded"] = sc.excluded();
    json failures = json::array();
    for (std::size_t r = 0; r < sc.failures.size(); ++r) {
      if (!sc.failures[r].empty()) failures.push_back(json{{"replicate", r}, {"reason", sc.failures[r]}});
    }
    s["failures"] = std::move(failures);
    s["converged"] = sc.converged;
    json table = json::array();
    for (std::size_t t = 0; t < names.size(); ++t) {
      const auto i = static_cast<Eigen::Index>(t);
      table.push_back(json{{"name", names[t]},
                           {"truth", result.truth[i]},
                           {"mse", sc.mse[i]},
                           {"mean_se", sc.mean_se[i]},
                           {"coverage", sc.coverage[i]}});
    }
    s["parameters"] = std::move(table);
    s["pooled_correlations"] = json{{"mse", pooled_correlation_mean(sc.mse, dims)},
                                    {"mean_se", pooled_correlation_mean(sc.mean_se, dims)},
                                    {"coverage", pooled_correlation_mean(sc.coverage, dims)}};
    scenarios.push_back(std::move(s));
  }
  out["scenarios"] = std::move(scenarios);
  return out;
}

}  // namespace ordprobit
