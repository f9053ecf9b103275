// Synthetic data from the latent Gaussian model and replicated
// estimation studies (MSE, mean standard error, Wald coverage).
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ordprobit/counts.hpp"
#include "ordprobit/fit.hpp"
#include "ordprobit/godambe.hpp"
#include "ordprobit/model.hpp"

namespace ordprobit {

using Rng = std::mt19937_64;

/// Independent generator for stream (a, b) of a master seed.
inline Rng make_stream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

inline double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

namespace detail {

inline Eigen::MatrixXd unit_diagonal(const Eigen::MatrixXd& s) {
  const Eigen::VectorXd inv_sd = s.diagonal().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd c = inv_sd.asDiagonal() * s * inv_sd.asDiagonal();
  c.diagonal().setOnes();
  return c;
}

}  // namespace detail

/// Random correlation matrix with about zero_fraction of its off-diagonal
/// entries exactly zero and minimum eigenvalue at least 1e-6.
///
/// A normalized Gram matrix of Gaussian draws is sparsified on a random
/// subset of pairs. If that breaks positive definiteness, eigenvalues are
/// clipped at 1e-4, the diagonal renormalized and the chosen zeros restored
/// once; failures are redrawn.
inline CorrelationParams random_sparse_correlation(int q, double zero_fraction, Rng& rng,
                                                   int max_attempts = 200) {
  if (q < 2) throw std::invalid_argument("random_sparse_correlation: q must be >= 2");
  if (!(zero_fraction >= 0.0 && zero_fraction < 1.0)) {
    throw std::invalid_argument("zero_fraction must lie in [0, 1)");
  }
  const int m = q * (q - 1) / 2;
  const int target = std::min(m, static_cast<int>(std::lround(zero_fraction * m)));
  std::normal_distribution<double> normal;

  std::vector<std::pair<int, int>> offdiag;
  for (int r = 0; r < q; ++r)
    for (int s = r + 1; s < q; ++s) offdiag.emplace_back(r, s);

  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Eigen::MatrixXd a(q, 2 * q);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
    Eigen::MatrixXd c = detail::unit_diagonal(a * a.transpose());

    std::shuffle(offdiag.begin(), offdiag.end(), rng);
    auto zero_chosen = [&](Eigen::MatrixXd& mat) {
      for (int z = 0; z < target; ++z) {
        const auto [r, s] = offdiag[z];
        mat(r, s) = mat(s, r) = 0.0;
      }
    };
    zero_chosen(c);

    if (min_eigenvalue(c) < 1e-6) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
      const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(1e-4);
      c = detail::unit_diagonal(eig.eigenvectors() * clipped.asDiagonal() *
                                eig.eigenvectors().transpose());
      zero_chosen(c);
      if (min_eigenvalue(c) < 1e-6) continue;
    }
    return CorrelationParams::from_matrix(c);
  }
  throw std::runtime_error("random_sparse_correlation: no positive definite matrix after " +
                           std::to_string(max_attempts) + " attempts");
}

/// Draws n latent vectors Z ~ N(0, sigma) and discretizes margin j by its
/// thresholds: y = k iff z in (a_{k-1}(j), a_k(j)].
inline OrdinalDataset sample_dataset(const CorrelationParams& sigma, const ThresholdSet& thresholds,
                                     int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_dataset: n must be >= 1");
  if (sigma.q() != thresholds.q()) throw std::invalid_argument("sample_dataset: q mismatch");
  const int q = sigma.q();
  const int K = thresholds.K();
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma.matrix());
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("sample_dataset: correlation matrix is not positive definite");
  }
  const Eigen::MatrixXd L = llt.matrixL();
  std::normal_distribution<double> normal;
  CategoryMatrix rows(n, q);
  Eigen::VectorXd e(q);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < q; ++j) e[j] = normal(rng);
    const Eigen::VectorXd z = L * e;
    for (int j = 0; j < q; ++j) {
      int cat = 1;
      while (cat < K && z[j] > thresholds.cuts()(j, cat - 1)) ++cat;
      rows(i, j) = cat;
    }
  }
  return OrdinalDataset(std::move(rows), K);
}

struct StudyConfig {
  int q = 5;
  int K = 4;
  std::vector<int> sample_sizes{500};
  int replicates = 100;
  double level = 0.95;
  double zero_fraction = 0.3;
  std::vector<std::vector<double>> threshold_menu{{0.0, 0.5, 1.0}, {-1.0, 0.0, 1.0}};
  std::uint64_t seed = 1;
  FitConfig fit;
  int threads = 0;  ///< 0: hardware concurrency, 1: serial

  void validate() const {
    ModelDims{q, K}.validate();
    if (sample_sizes.empty()) throw std::invalid_argument("study needs at least one sample size");
    for (int n : sample_sizes)
      if (n < 1) throw std::invalid_argument("sample sizes must be >= 1");
    if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0, 1)");
    if (!(zero_fraction >= 0.0 && zero_fraction < 1.0)) {
      throw std::invalid_argument("zero_fraction must lie in [0, 1)");
    }
    if (threshold_menu.empty()) throw std::invalid_argument("threshold_menu is empty");
    for (const auto& t : threshold_menu) {
      if (static_cast<int>(t.size()) != K - 1) {
        throw std::invalid_argument("each threshold vector needs K-1 entries");
      }
      for (std::size_t k = 1; k < t.size(); ++k)
        if (!(t[k - 1] < t[k])) throw std::invalid_argument("threshold vectors must be increasing");
    }
    if (threads < 0) throw std::invalid_argument("threads must be >= 0");
    fit.validate();
  }
};

struct ReplicateOutcome {
  bool converged = false;
  bool usable = false;  ///< converged and produced Wald intervals
  std::string failure;
  Eigen::VectorXd estimate;
  Eigen::VectorXd std_error;
  std::vector<bool> covered;
};

struct ScenarioResult {
  int n = 0;
  Eigen::VectorXd mse;
  Eigen::VectorXd mean_se;
  Eigen::VectorXd coverage;
  std::vector<bool> converged;
  std::vector<std::string> failures;  ///< per replicate, empty when usable
  int usable = 0;

  int excluded() const { return static_cast<int>(converged.size()) - usable; }
};

struct StudyResult {
  Theta truth;
  std::vector<ScenarioResult> scenarios;
};

/// Mean of v over the correlation block (first num_pairs entries).
inline double pooled_correlation_mean(const Eigen::VectorXd& v, const ModelDims& dims) {
  return v.head(dims.num_pairs()).mean();
}

/// True parameter for a study: one sparse correlation matrix plus a menu
/// threshold vector drawn per margin.
inline Theta draw_study_truth(const StudyConfig& config) {
  Rng rng = make_stream(config.seed, 0, 0);
  const CorrelationParams sigma = random_sparse_correlation(config.q, config.zero_fraction, rng);
  std::uniform_int_distribution<std::size_t> pick(0, config.threshold_menu.size() - 1);
  Eigen::MatrixXd cuts(config.q, config.K - 1);
  for (int j = 0; j < config.q; ++j) {
    const auto& t = config.threshold_menu[pick(rng)];
    for (int k = 0; k < config.K - 1; ++k) cuts(j, k) = t[k];
  }
  return Theta(sigma, ThresholdSet(std::move(cuts)));
}

inline ReplicateOutcome run_replicate(const Theta& truth, int n, double level,
                                      const FitConfig& fit_config, Rng& rng) {
  ReplicateOutcome out;
  try {
    const OrdinalDataset data = sample_dataset(truth.correlations(), truth.thresholds(), n, rng);
    const PairCounts counts = compute_counts(data);
    const FitResult fit = maximize(counts, data, fit_config);
    out.converged = fit.converged;
    out.estimate = fit.theta_hat.values();
    if (!fit.converged) {
      out.failure = "not converged: " + fit.message;
      return out;
    }
    const GodambeMatrices g = godambe(fit.theta_hat, data, counts);
    const auto intervals = wald_intervals(fit.theta_hat, g.G_hat, n, level);
    out.std_error.resize(truth.size());
    out.covered.resize(truth.size());
    for (Eigen::Index t = 0; t < truth.size(); ++t) {
      out.std_error[t] = intervals[t].std_error;
      out.covered[t] = intervals[t].covers(truth[t]);
    }
    out.usable = true;
  } catch (const std::exception& e) {
    out.failure = e.what();
    out.usable = false;
  }
  return out;
}

inline StudyResult run_study(const StudyConfig& config) {
  config.validate();
  StudyResult result{draw_study_truth(config), {}};
  const Theta& truth = result.truth;
  const int np = static_cast<int>(truth.size());
  const int R = config.replicates;
  int workers = config.threads == 0 ? static_cast<int>(std::thread::hardware_concurrency())
                                    : config.threads;
  workers = std::clamp(workers, 1, R);

  for (std::size_t si = 0; si < config.sample_sizes.size(); ++si) {
    const int n = config.sample_sizes[si];
    std::vector<ReplicateOutcome> outcomes(R);
    auto job = [&](int rep) {
      Rng rng = make_stream(config.seed, si + 1, static_cast<std::uint64_t>(rep));
      outcomes[rep] = run_replicate(truth, n, config.level, config.fit, rng);
    };
    if (workers == 1) {
      for (int rep = 0; rep < R; ++rep) job(rep);
    } else {
      std::atomic<int> next{0};
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (int rep = next++; rep < R; rep = next++) job(rep);
        });
      }
      for (auto& t : pool) t.join();
    }

    ScenarioResult sc;
    sc.n = n;
    sc.mse = Eigen::VectorXd::Zero(np);
    sc.mean_se = Eigen::VectorXd::Zero(np);
    sc.coverage = Eigen::VectorXd::Zero(np);
    for (const auto& o : outcomes) {
      sc.converged.push_back(o.converged);
      sc.failures.push_back(o.usable ? std::string() : o.failure);
      if (!o.usable) continue;
      ++sc.usable;
      sc.mse += (o.estimate - truth.values()).cwiseAbs2();
      sc.mean_se += o.std_error;
      for (int t = 0; t < np; ++t) sc.coverage[t] += o.covered[t] ? 1.0 : 0.0;
    }
    if (sc.usable == 0) {
      throw std::runtime_error("study: every replicate failed at n=" + std::to_string(n) +
                               " (first failure: " + outcomes.front().failure + ")");
    }
    sc.mse /= sc.usable;
    sc.mean_se /= sc.usable;
    sc.coverage /= sc.usable;
    result.scenarios.push_back(std::move(sc));
  }
  return result;
}

}  // namespace ordprobit
