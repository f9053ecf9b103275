// Maximum pairwise likelihood estimation.
//
// The objective is maximized over psi (log-spaced thresholds) with a
// projected BFGS iteration; only the correlation coordinates carry box
// constraints, [-rho_bound, rho_bound].
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ordprobit/counts.hpp"
#include "ordprobit/gauss.hpp"
#include "ordprobit/model.hpp"
#include "ordprobit/pairwise.hpp"

namespace ordprobit {

/// Raised when the data cannot identify the model (e.g. an empty category).
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class GradientMode { analytic, finite_difference };

struct FitConfig {
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;   ///< on |score|_inf / n
  double objective_tolerance = 1e-10; ///< relative change of loglik / n
  double rho_bound = 0.999;
  GradientMode gradient = GradientMode::analytic;

  void validate() const {
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
    if (!(gradient_tolerance > 0.0)) throw std::invalid_argument("gradient_tolerance must be > 0");
    if (!(objective_tolerance > 0.0)) throw std::invalid_argument("objective_tolerance must be > 0");
    if (!(rho_bound > 0.0 && rho_bound < 1.0)) {
      throw std::invalid_argument("rho_bound must lie in (0, 1)");
    }
    if (rho_bound > kMaxAbsRho) throw std::invalid_argument("rho_bound exceeds 1 - 1e-6");
  }
};

struct FitResult {
  Theta theta_hat;
  Psi psi_hat;
  double loglik = 0.0;
  double initial_loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;  ///< |score(theta_hat)|_inf over free coordinates
  bool sigma_pd = false;
  int underflow_count = 0;        ///< floored cells with positive count at theta_hat
  int underflow_evaluations = 0;  ///< objective evaluations that hit the floor
  std::string message;
  std::vector<double> loglik_trace;  ///< loglik at every accepted iterate
};

/// Central differences of the pairwise log-likelihood in theta, step
/// 1e-6 * max(1, |theta_t|).
inline Eigen::VectorXd finite_difference_score(const Theta& theta, const PairCounts& counts) {
  Eigen::VectorXd out(theta.size());
  Theta probe = theta;
  for (Eigen::Index t = 0; t < theta.size(); ++t) {
    const double h = 1e-6 * std::max(1.0, std::abs(theta[t]));
    probe.values()[t] = theta[t] + h;
    const double up = pairwise_loglik(probe, counts);
    probe.values()[t] = theta[t] - h;
    const double down = pairwise_loglik(probe, counts);
    probe.values()[t] = theta[t];
    out[t] = (up - down) / (2.0 * h);
  }
  return out;
}

/// Starting value: thresholds at normal quantiles of cumulative marginal
/// frequencies, all correlations zero.
inline Theta initialize(const OrdinalDataset& data) {
  const ModelDims dims = data.dims();
  Eigen::VectorXd values = Eigen::VectorXd::Zero(dims.num_params());
  for (int j = 0; j < dims.q; ++j) {
    const auto tally = margin_tally(data, j);
    for (int l = 1; l <= dims.K; ++l) {
      if (tally[l - 1] == 0) {
        throw EstimationError("threshold not identifiable from data: margin " + std::to_string(j + 1) +
                              " has no observations in category " + std::to_string(l));
      }
    }
    std::int64_t cum = 0;
    for (int k = 1; k < dims.K; ++k) {
      cum += tally[k - 1];
      values[dims.threshold_index(j, k)] =
          norm_quantile(static_cast<double>(cum) / static_cast<double>(data.n()));
    }
  }
  return Theta(dims, std::move(values));
}

inline bool is_positive_definite(const Eigen::MatrixXd& sigma) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma, Eigen::EigenvaluesOnly);
  return eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() > 0.0;
}

/// Consecutive iterations with objective change below objective_tolerance
/// before the iteration stops without meeting the gradient tolerance; at least
/// this many, and at least one per parameter.
inline constexpr int kMinStalledIterations = 10;

namespace detail {

struct ObjectivePoint {
  double value = std::numeric_limits<double>::infinity();  // -loglik / n
  Eigen::VectorXd grad_psi;                                 // of value
  Eigen::VectorXd score_theta;                              // of loglik
  double loglik = 0.0;
  int underflow = 0;
  bool ok = false;
};

}  // namespace detail

inline FitResult maximize(const PairCounts& counts, const Theta& start, const FitConfig& config) {
  config.validate();
  check_compatible(start, counts);
  const ModelDims dims = start.dims();
  const int np = dims.num_params();
  const int nc = dims.num_pairs();
  const double n = static_cast<double>(counts.n());
  const double b = config.rho_bound;

  int underflow_evaluations = 0;
  auto evaluate = [&](const Eigen::VectorXd& x) {
    detail::ObjectivePoint pt;
    const Psi psi(dims, x);
    const Theta theta = from_psi(psi);
    if (!theta.values().allFinite()) return pt;
    if (config.gradient == GradientMode::analytic) {
      PairwiseEvaluation ev = evaluate_pairwise(theta, counts);
      pt.loglik = ev.loglik;
      pt.score_theta = std::move(ev.score);
      pt.underflow = ev.underflow_count;
    } else {
      int uf = 0;
      pt.loglik = pairwise_loglik(CellProbCache(theta), counts, &uf);
      pt.score_theta = finite_difference_score(theta, counts);
      pt.underflow = uf;
    }
    if (pt.underflow > 0) ++underflow_evaluations;
    pt.value = -pt.loglik / n;
    pt.grad_psi = -chain_rule_score(pt.score_theta, psi) / n;
    pt.ok = std::isfinite(pt.value) && pt.grad_psi.allFinite();
    return pt;
  };

  auto project = [&](Eigen::VectorXd& x) {
    for (int i = 0; i < nc; ++i) x[i] = std::clamp(x[i], -b, b);
  };

  // Coordinates sitting on a bound with the gradient pushing outward.
  auto active_mask = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
    std::vector<bool> active(np, false);
    for (int i = 0; i < nc; ++i) {
      if ((x[i] <= -b && g[i] > 0.0) || (x[i] >= b && g[i] < 0.0)) active[i] = true;
    }
    return active;
  };

  auto stationarity = [&](const detail::ObjectivePoint& pt, const std::vector<bool>& active) {
    double norm = 0.0;
    for (int i = 0; i < np; ++i)
      if (!active[i]) norm = std::max(norm, std::abs(pt.score_theta[i]));
    return norm;
  };

  Eigen::VectorXd x = to_psi(start).values();
  project(x);
  detail::ObjectivePoint cur = evaluate(x);
  if (!cur.ok) throw EstimationError("pairwise log-likelihood is not finite at the starting value");

  FitResult result{.theta_hat = from_psi(Psi(dims, x)), .psi_hat = Psi(dims, x), .message = {}, .loglik_trace = {}};
  result.initial_loglik = cur.loglik;
  result.loglik_trace.push_back(cur.loglik);

  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(np, np);
  bool hinv_is_identity = true;
  int stalls = 0;
  std::string message = "iteration limit reached";
  bool done = false;
  int iter = 0;
  std::vector<bool> active = active_mask(x, cur.grad_psi);
  double grad_norm = stationarity(cur, active);

  for (; iter < config.max_iterations; ++iter) {
    if (grad_norm <= config.gradient_tolerance * n) {
      message = "gradient tolerance reached";
      done = true;
      break;
    }

    Eigen::VectorXd g_free = cur.grad_psi;
    for (int i = 0; i < np; ++i)
      if (active[i]) g_free[i] = 0.0;
    Eigen::VectorXd dir = -(hinv * g_free);
    for (int i = 0; i < np; ++i)
      if (active[i]) dir[i] = 0.0;
    if (!(dir.dot(g_free) < 0.0)) {
      hinv.setIdentity();
      hinv_is_identity = true;
      dir = -g_free;
    }

    detail::ObjectivePoint next;
    Eigen::VectorXd x_next;
    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double step = 1.0;
      const double longest = dir.lpNorm<Eigen::Infinity>();
      if (longest * step > 2.0) step = 2.0 / longest;
      for (int bt = 0; bt < 60; ++bt, step *= 0.5) {
        x_next = x + step * dir;
        project(x_next);
        const Eigen::VectorXd s = x_next - x;
        if (s.lpNorm<Eigen::Infinity>() == 0.0) break;
        next = evaluate(x_next);
        if (next.ok && next.value <= cur.value + 1e-4 * cur.grad_psi.dot(s)) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        if (hinv_is_identity) break;
        hinv.setIdentity();
        hinv_is_identity = true;
        dir = -g_free;
      }
    }
    if (!accepted) {
      message = "line search failed";
      break;
    }

    const Eigen::VectorXd s = x_next - x;
    const Eigen::VectorXd y = next.grad_psi - cur.grad_psi;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (hinv_is_identity) hinv *= sy / y.squaredNorm();
      const double rho_k = 1.0 / sy;
      const Eigen::VectorXd hy = hinv * y;
      hinv += (rho_k * rho_k * y.dot(hy) + rho_k) * (s * s.transpose()) -
              rho_k * (hy * s.transpose() + s * hy.transpose());
      hinv_is_identity = false;
    }

    const double change = std::abs(cur.value - next.value);
    x = std::move(x_next);
    cur = std::move(next);
    result.loglik_trace.push_back(cur.loglik);
    active = active_mask(x, cur.grad_psi);
    grad_norm = stationarity(cur, active);

    stalls = change <= config.objective_tolerance * std::max(1.0, std::abs(cur.value)) ? stalls + 1 : 0;
    if (stalls >= std::max(kMinStalledIterations, np)) {
      message = "objective change below tolerance";
      ++iter;
      break;
    }
  }
  if (!done && grad_norm <= config.gradient_tolerance * n) done = true;

  result.psi_hat = Psi(dims, x);
  result.theta_hat = from_psi(result.psi_hat);
  result.loglik = cur.loglik;
  result.iterations = iter;
  result.gradient_norm = grad_norm;
  result.converged = done;
  result.message = message;
  result.underflow_count = cur.underflow;
  result.underflow_evaluations = underflow_evaluations;
  result.sigma_pd = is_positive_definite(result.theta_hat.correlations().matrix());
  return result;
}

inline FitResult maximize(const PairCounts& counts, const OrdinalDataset& data,
                          const FitConfig& config = {}) {
  return maximize(counts, initialize(data), config);
}

}  // namespace ordprobit
