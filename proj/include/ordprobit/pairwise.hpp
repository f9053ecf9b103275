// Pairwise log-likelihood of the ordered probit model and its closed-form
// score vector.
//
// Every bivariate cell probability is a four-corner combination of Phi2,
// taken in whichever mirror orientation keeps the corner values small.
// Differentiating through Phi2 gives
//   d Phi2 / d x1  = phi(x1) Phi((x2 - rho x1) / sqrt(1 - rho^2))
//   d Phi2 / d rho = phi2(x1, x2; rho)
// so the score needs, per pair, the corner densities and one bracket of
// conditional CDF differences per (threshold, opposite category). Corners
// with an infinite coordinate contribute their analytic limits (density 0,
// conditional CDF 0 or 1).
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "ordprobit/counts.hpp"
#include "ordprobit/gauss.hpp"
#include "ordprobit/model.hpp"

namespace ordprobit {

/// Floor applied to cell probabilities inside logarithms and reciprocals.
inline constexpr double kProbFloor = 1e-300;

/// Per-pair tables at a fixed theta: rectangle probabilities plus the
/// derivative brackets shared by the likelihood and every score route.
struct PairTables {
  int r = 0;
  int s = 0;
  double rho = 0.0;
  int K = 2;
  std::vector<double> probs;        // K x K, (l-1, m-1)
  std::vector<double> corner_dens;  // (K+1) x (K+1), phi2 at (a_l(r), a_m(s))
  std::vector<double> bracket_r;    // (K-1) x K: d cell(k, m) / d a_k(r)
  std::vector<double> bracket_s;    // (K-1) x K: d cell(l, k) / d a_k(s)

  double prob(int l, int m) const { return probs[(l - 1) * K + (m - 1)]; }
  double dens(int l, int m) const { return corner_dens[l * (K + 1) + m]; }
  /// phi(a_k(r)) [Phi_c(a_m(s) | a_k(r)) - Phi_c(a_{m-1}(s) | a_k(r))]
  double d_first(int k, int m) const { return bracket_r[(k - 1) * K + (m - 1)]; }
  /// phi(a_k(s)) [Phi_c(a_l(r) | a_k(s)) - Phi_c(a_{l-1}(r) | a_k(s))]
  double d_second(int k, int l) const { return bracket_s[(k - 1) * K + (l - 1)]; }
  /// d cell(l, m) / d rho
  double d_rho(int l, int m) const {
    return dens(l, m) - dens(l - 1, m) - dens(l, m - 1) + dens(l - 1, m - 1);
  }
};

/// Cell probabilities and derivative tables for every pair at one theta.
class CellProbCache {
 public:
  explicit CellProbCache(const Theta& theta) : dims_(theta.dims()) {
    const int q = dims_.q;
    const int K = dims_.K;
    pairs_.reserve(dims_.num_pairs());
    constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();
    std::array<std::vector<double>, 4> corner;
    for (int r = 0; r < q; ++r) {
      for (int s = r + 1; s < q; ++s) {
        PairTables t;
        t.r = r;
        t.s = s;
        t.K = K;
        const Rho rho(theta.rho(r, s));
        t.rho = rho.value();

        t.corner_dens.assign((K + 1) * (K + 1), 0.0);
        for (int l = 1; l < K; ++l)
          for (int m = 1; m < K; ++m)
            t.corner_dens[l * (K + 1) + m] = bvn_pdf(theta.cut(r, l), theta.cut(s, m), rho);

        // Phi2 corner grids in the four mirror orientations, filled on demand.
        for (auto& g : corner) g.assign((K + 1) * (K + 1), kUnset);
        auto corner_value = [&](bool f1, bool f2, int k, int m) {
          double& slot = corner[2 * f1 + f2][k * (K + 1) + m];
          if (std::isnan(slot)) {
            const Limit x = theta.cut(r, k), y = theta.cut(s, m);
            slot = bvn_cdf(f1 ? -x : x, f2 ? -y : y, Rho(f1 != f2 ? -t.rho : t.rho));
          }
          return slot;
        };

        t.probs.resize(K * K);
        for (int l = 1; l <= K; ++l) {
          const bool f1 = detail::reflect_axis(theta.cut(r, l - 1), theta.cut(r, l));
          const int xh = f1 ? l - 1 : l, xl = f1 ? l : l - 1;
          for (int m = 1; m <= K; ++m) {
            const bool f2 = detail::reflect_axis(theta.cut(s, m - 1), theta.cut(s, m));
            const int yh = f2 ? m - 1 : m, yl = f2 ? m : m - 1;
            const double p = corner_value(f1, f2, xh, yh) - corner_value(f1, f2, xl, yh) -
                             corner_value(f1, f2, xh, yl) + corner_value(f1, f2, xl, yl);
            t.probs[(l - 1) * K + (m - 1)] = std::clamp(p, 0.0, 1.0);
          }
        }

        t.bracket_r.resize((K - 1) * K);
        t.bracket_s.resize((K - 1) * K);
        for (int k = 1; k < K; ++k) {
          const double ar = theta.cut(r, k);
          const double as = theta.cut(s, k);
          const double phi_r = norm_pdf(ar);
          const double phi_s = norm_pdf(as);
          for (int m = 1; m <= K; ++m) {
            t.bracket_r[(k - 1) * K + (m - 1)] =
                phi_r * norm_mass(detail::conditional_arg(theta.cut(s, m - 1), ar, t.rho),
                                  detail::conditional_arg(theta.cut(s, m), ar, t.rho));
            t.bracket_s[(k - 1) * K + (m - 1)] =
                phi_s * norm_mass(detail::conditional_arg(theta.cut(r, m - 1), as, t.rho),
                                  detail::conditional_arg(theta.cut(r, m), as, t.rho));
          }
        }
        pairs_.push_back(std::move(t));
      }
    }
  }

  const ModelDims& dims() const { return dims_; }
  const PairTables& pair(int p) const { return pairs_[p]; }
  const PairTables& pair(int r, int s) const { return pairs_[pair_index(r, s, dims_.q)]; }
  int num_pairs() const { return static_cast<int>(pairs_.size()); }

 private:
  ModelDims dims_;
  std::vector<PairTables> pairs_;
};

/// Gradient of log pr(Y_r = l, Y_s = m): at most five nonzero entries.
struct CellGradient {
  std::array<int, 5> index{};
  std::array<double, 5> value{};
  int size = 0;

  void add(int i, double v) {
    index[size] = i;
    value[size] = v;
    ++size;
  }
  template <typename Vec>
  void accumulate_into(Vec& out, double weight = 1.0) const {
    for (int e = 0; e < size; ++e) out[index[e]] += weight * value[e];
  }
};

inline CellGradient cell_gradient(const CellProbCache& cache, int pair, int l, int m) {
  const ModelDims& d = cache.dims();
  const PairTables& t = cache.pair(pair);
  const double inv = 1.0 / std::max(t.prob(l, m), kProbFloor);
  CellGradient g;
  g.add(pair, t.d_rho(l, m) * inv);
  if (l < d.K) g.add(d.threshold_index(t.r, l), t.d_first(l, m) * inv);
  if (l > 1) g.add(d.threshold_index(t.r, l - 1), -t.d_first(l - 1, m) * inv);
  if (m < d.K) g.add(d.threshold_index(t.s, m), t.d_second(m, l) * inv);
  if (m > 1) g.add(d.threshold_index(t.s, m - 1), -t.d_second(m - 1, l) * inv);
  return g;
}

inline void check_compatible(const Theta& theta, const PairCounts& counts) {
  if (!(theta.dims() == counts.dims())) {
    throw std::invalid_argument("theta and counts have different (q, K)");
  }
}

inline double cell_prob(const Theta& theta, int r, int s, int l, int m) {
  const int K = theta.dims().K;
  if (l < 1 || l > K || m < 1 || m > K) throw std::out_of_range("cell_prob: category index");
  pair_index(r, s, theta.dims().q);  // validates r < s
  return rect_prob(theta.cut(r, l - 1), theta.cut(r, l), theta.cut(s, m - 1), theta.cut(s, m),
                   Rho(theta.rho(r, s)));
}

/// Log-likelihood grouped by cell counts; cells with zero count are skipped.
inline double pairwise_loglik(const CellProbCache& cache, const PairCounts& counts,
                              int* underflow_count = nullptr) {
  const int K = cache.dims().K;
  double ll = 0.0;
  int underflow = 0;
  for (int p = 0; p < cache.num_pairs(); ++p) {
    const PairTables& t = cache.pair(p);
    for (int l = 1; l <= K; ++l) {
      for (int m = 1; m <= K; ++m) {
        const auto n = counts(p, l, m);
        if (n == 0) continue;
        const double prob = t.prob(l, m);
        if (prob < kProbFloor) ++underflow;
        ll += static_cast<double>(n) * std::log(std::max(prob, kProbFloor));
      }
    }
  }
  if (underflow_count) *underflow_count = underflow;
  return ll;
}

inline double pairwise_loglik(const Theta& theta, const PairCounts& counts) {
  check_compatible(theta, counts);
  return pairwise_loglik(CellProbCache(theta), counts);
}

/// Correlation block of the score: for each pair, the count-weighted sum of
/// four-corner density combinations over cell probabilities.
inline Eigen::VectorXd score_rho(const CellProbCache& cache, const PairCounts& counts) {
  const int K = cache.dims().K;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(cache.num_pairs());
  for (int p = 0; p < cache.num_pairs(); ++p) {
    const PairTables& t = cache.pair(p);
    double acc = 0.0;
    for (int l = 1; l <= K; ++l) {
      for (int m = 1; m <= K; ++m) {
        const auto n = counts(p, l, m);
        if (n == 0) continue;
        acc += static_cast<double>(n) * t.d_rho(l, m) / std::max(t.prob(l, m), kProbFloor);
      }
    }
    out[p] = acc;
  }
  return out;
}

inline Eigen::VectorXd score_rho(const Theta& theta, const PairCounts& counts) {
  check_compatible(theta, counts);
  return score_rho(CellProbCache(theta), counts);
}

namespace detail {

inline double weighted_reciprocal(const PairCounts& counts, const PairTables& t, int pair, int l,
                                  int m) {
  const auto n = counts(pair, l, m);
  if (n == 0) return 0.0;
  return static_cast<double>(n) / std::max(t.prob(l, m), kProbFloor);
}

}  // namespace detail

/// Split of d loglik / d a_k(j) into the part from pairs where j is the
/// second margin (r < j) and the part where j is the first margin (s > j).
struct ThresholdScoreParts {
  double as_second = 0.0;
  double as_first = 0.0;
  double total() const { return as_second + as_first; }
};

inline ThresholdScoreParts score_threshold_parts(const CellProbCache& cache,
                                                 const PairCounts& counts, int j, int k) {
  const ModelDims& d = cache.dims();
  if (j < 0 || j >= d.q) throw std::out_of_range("score_threshold: margin index");
  if (k < 1 || k >= d.K) throw std::out_of_range("score_threshold: threshold index");
  ThresholdScoreParts parts;
  for (int r = 0; r < j; ++r) {
    const int p = pair_index(r, j, d.q);
    const PairTables& t = cache.pair(p);
    for (int l = 1; l <= d.K; ++l) {
      const double w = detail::weighted_reciprocal(counts, t, p, l, k) -
                       detail::weighted_reciprocal(counts, t, p, l, k + 1);
      parts.as_second += t.d_second(k, l) * w;
    }
  }
  for (int s = j + 1; s < d.q; ++s) {
    const int p = pair_index(j, s, d.q);
    const PairTables& t = cache.pair(p);
    for (int m = 1; m <= d.K; ++m) {
      const double w = detail::weighted_reciprocal(counts, t, p, k, m) -
                       detail::weighted_reciprocal(counts, t, p, k + 1, m);
      parts.as_first += t.d_first(k, m) * w;
    }
  }
  return parts;
}

inline double score_threshold(const CellProbCache& cache, const PairCounts& counts, int j, int k) {
  return score_threshold_parts(cache, counts, j, k).total();
}

inline double score_threshold(const Theta& theta, const PairCounts& counts, int j, int k) {
  check_compatible(theta, counts);
  return score_threshold(CellProbCache(theta), counts, j, k);
}

inline Eigen::VectorXd pairwise_score(const CellProbCache& cache, const PairCounts& counts) {
  const ModelDims& d = cache.dims();
  Eigen::VectorXd out(d.num_params());
  out.head(d.num_pairs()) = score_rho(cache, counts);
  for (int j = 0; j < d.q; ++j)
    for (int k = 1; k < d.K; ++k) out[d.threshold_index(j, k)] = score_threshold(cache, counts, j, k);
  return out;
}

inline Eigen::VectorXd pairwise_score(const Theta& theta, const PairCounts& counts) {
  check_compatible(theta, counts);
  return pairwise_score(CellProbCache(theta), counts);
}

/// Log-likelihood, score and floor diagnostics from one shared cache.
struct PairwiseEvaluation {
  double loglik = 0.0;
  Eigen::VectorXd score;
  int underflow_count = 0;
};

inline PairwiseEvaluation evaluate_pairwise(const Theta& theta, const PairCounts& counts,
                                            bool with_score = true) {
  check_compatible(theta, counts);
  const CellProbCache cache(theta);
  PairwiseEvaluation ev;
  ev.loglik = pairwise_loglik(cache, counts, &ev.underflow_count);
  if (with_score) ev.score = pairwise_score(cache, counts);
  return ev;
}

/// Score of the single bivariate contribution of cell (l, m) of pair (r, s),
/// zero-padded to the full parameter length.
inline Eigen::VectorXd per_pair_score(const CellProbCache& cache, int r, int s, int l, int m) {
  const ModelDims& d = cache.dims();
  if (l < 1 || l > d.K || m < 1 || m > d.K) throw std::out_of_range("per_pair_score: category");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d.num_params());
  cell_gradient(cache, pair_index(r, s, d.q), l, m).accumulate_into(out);
  return out;
}

inline Eigen::VectorXd per_pair_score(const Theta& theta, int r, int s, int l, int m) {
  return per_pair_score(CellProbCache(theta), r, s, l, m);
}

/// Score of one observation's pairwise log-likelihood (sum over its pairs).
inline Eigen::VectorXd per_observation_score(const CellProbCache& cache, std::span<const int> row) {
  const ModelDims& d = cache.dims();
  if (static_cast<int>(row.size()) != d.q) {
    throw std::invalid_argument("per_observation_score: row length differs from q");
  }
  for (int v : row) {
    if (v < 1 || v > d.K) throw std::domain_error("per_observation_score: category out of range");
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d.num_params());
  int p = 0;
  for (int r = 0; r < d.q; ++r)
    for (int s = r + 1; s < d.q; ++s, ++p) cell_gradient(cache, p, row[r], row[s]).accumulate_into(out);
  return out;
}

inline Eigen::VectorXd per_observation_score(const Theta& theta, std::span<const int> row) {
  return per_observation_score(CellProbCache(theta), row);
}

}  // namespace ordprobit
