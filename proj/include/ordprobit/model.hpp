// Parameter containers for the multivariate ordered probit model.
//
// Packing order of the natural parameter vector theta:
//   rho(0,1), rho(0,2), ..., rho(q-2,q-1),          correlations, lexicographic
//   a_1(0), ..., a_{K-1}(0), ..., a_1(q-1), ...     thresholds, margin by margin
//
// Margins are 0-based. Categories are 1-based (1..K) and category l occupies
// the latent interval (a_{l-1}, a_l] with a_0 = -inf and a_K = +inf, so the
// threshold index k runs over 1..K-1.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

#include "ordprobit/gauss.hpp"

namespace ordprobit {

struct ModelDims {
  int q = 2;  ///< number of margins
  int K = 2;  ///< categories per margin
  int n = 1;  ///< observations (only validated; parameter layout ignores it)

  void validate() const {
    if (q < 2) throw std::invalid_argument("q must be >= 2, got " + std::to_string(q));
    if (K < 2) throw std::invalid_argument("K must be >= 2, got " + std::to_string(K));
    if (n < 1) throw std::invalid_argument("n must be >= 1, got " + std::to_string(n));
  }
  int num_pairs() const { return q * (q - 1) / 2; }
  int num_thresholds() const { return (K - 1) * q; }
  int num_params() const { return num_pairs() + num_thresholds(); }
  /// Position of a_k(j) in theta, k in 1..K-1.
  int threshold_index(int j, int k) const { return num_pairs() + j * (K - 1) + (k - 1); }

  friend bool operator==(const ModelDims& a, const ModelDims& b) {
    return a.q == b.q && a.K == b.K;
  }
};

/// Flat index of the margin pair (r, s), r < s, in lexicographic order.
inline int pair_index(int r, int s, int q) {
  if (!(0 <= r && r < s && s < q)) {
    throw std::domain_error("pair_index: need 0 <= r < s < q, got r=" + std::to_string(r) +
                            " s=" + std::to_string(s) + " q=" + std::to_string(q));
  }
  return r * q - r * (r + 1) / 2 + (s - r - 1);
}

/// Ordered cut-points, one row per margin (q x (K-1)).
class ThresholdSet {
 public:
  explicit ThresholdSet(Eigen::MatrixXd cuts) : cuts_(std::move(cuts)) {
    for (Eigen::Index j = 0; j < cuts_.rows(); ++j) {
      for (Eigen::Index k = 0; k < cuts_.cols(); ++k) {
        if (!std::isfinite(cuts_(j, k))) {
          throw std::domain_error("threshold a_" + std::to_string(k + 1) + "(" +
                                  std::to_string(j) + ") is not finite");
        }
        if (k > 0 && !(cuts_(j, k - 1) < cuts_(j, k))) {
          throw std::domain_error("thresholds of margin " + std::to_string(j) +
                                  " are not strictly increasing");
        }
      }
    }
  }

  int q() const { return static_cast<int>(cuts_.rows()); }
  int K() const { return static_cast<int>(cuts_.cols()) + 1; }
  const Eigen::MatrixXd& cuts() const { return cuts_; }

  /// a_k(j) for k in 0..K, with the implicit infinite ends.
  Limit cut(int j, int k) const {
    if (k <= 0) return -kInf;
    if (k >= K()) return kInf;
    return cuts_(j, k - 1);
  }

 private:
  Eigen::MatrixXd cuts_;
};

/// Upper-triangle correlations rho(r, s), r < s, lexicographic.
class CorrelationParams {
 public:
  CorrelationParams(int q, Eigen::VectorXd rhos) : q_(q), rhos_(std::move(rhos)) {
    if (rhos_.size() != q * (q - 1) / 2) {
      throw std::invalid_argument("correlation vector has wrong length for q=" +
                                  std::to_string(q));
    }
    for (Eigen::Index p = 0; p < rhos_.size(); ++p) {
      if (!(std::abs(rhos_[p]) < 1.0)) {
        throw std::domain_error("correlation entry " + std::to_string(p) + " = " +
                                std::to_string(rhos_[p]) + " outside (-1, 1)");
      }
    }
  }

  static CorrelationParams from_matrix(const Eigen::MatrixXd& sigma) {
    const int q = static_cast<int>(sigma.rows());
    Eigen::VectorXd rhos(q * (q - 1) / 2);
    for (int r = 0; r < q; ++r)
      for (int s = r + 1; s < q; ++s) rhos[pair_index(r, s, q)] = sigma(r, s);
    return CorrelationParams(q, std::move(rhos));
  }

  int q() const { return q_; }
  const Eigen::VectorXd& rhos() const { return rhos_; }
  double rho(int r, int s) const { return rhos_[pair_index(r, s, q_)]; }

  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(q_, q_);
    for (int r = 0; r < q_; ++r)
      for (int s = r + 1; s < q_; ++s) sigma(r, s) = sigma(s, r) = rho(r, s);
    return sigma;
  }

 private:
  int q_;
  Eigen::VectorXd rhos_;
};

/// Natural parameter vector.
class Theta {
 public:
  Theta(ModelDims dims, Eigen::VectorXd values) : dims_(dims), values_(std::move(values)) {
    dims_.validate();
    if (values_.size() != dims_.num_params()) {
      throw std::invalid_argument("theta has length " + std::to_string(values_.size()) +
                                  ", expected " + std::to_string(dims_.num_params()));
    }
  }

  Theta(const CorrelationParams& corr, const ThresholdSet& thresholds)
      : dims_{corr.q(), thresholds.K()} {
    if (corr.q() != thresholds.q()) {
      throw std::invalid_argument("correlations and thresholds disagree on q");
    }
    dims_.validate();
    values_.resize(dims_.num_params());
    values_.head(dims_.num_pairs()) = corr.rhos();
    for (int j = 0; j < dims_.q; ++j)
      for (int k = 1; k < dims_.K; ++k)
        values_[dims_.threshold_index(j, k)] = thresholds.cuts()(j, k - 1);
  }

  const ModelDims& dims() const { return dims_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }
  Eigen::Index size() const { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_[i]; }

  double rho(int r, int s) const { return values_[pair_index(r, s, dims_.q)]; }

  /// a_k(j) for k in 0..K, with the implicit infinite ends.
  Limit cut(int j, int k) const {
    if (k <= 0) return -kInf;
    if (k >= dims_.K) return kInf;
    return values_[dims_.threshold_index(j, k)];
  }

  CorrelationParams correlations() const {
    return CorrelationParams(dims_.q, values_.head(dims_.num_pairs()));
  }

  ThresholdSet thresholds() const {
    Eigen::MatrixXd cuts(dims_.q, dims_.K - 1);
    for (int j = 0; j < dims_.q; ++j)
      for (int k = 1; k < dims_.K; ++k) cuts(j, k - 1) = cut(j, k);
    return ThresholdSet(std::move(cuts));
  }

 private:
  ModelDims dims_;
  Eigen::VectorXd values_;
};

/// Reparametrized vector: correlations and a_1(j) unchanged, remaining
/// thresholds replaced by log-spacings delta_k(j) = log(a_k(j) - a_{k-1}(j)).
class Psi {
 public:
  Psi(ModelDims dims, Eigen::VectorXd values) : dims_(dims), values_(std::move(values)) {
    dims_.validate();
    if (values_.size() != dims_.num_params()) {
      throw std::invalid_argument("psi has length " + std::to_string(values_.size()) +
                                  ", expected " + std::to_string(dims_.num_params()));
    }
  }
  const ModelDims& dims() const { return dims_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }
  Eigen::Index size() const { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_[i]; }

 private:
  ModelDims dims_;
  Eigen::VectorXd values_;
};

inline Psi to_psi(const Theta& theta) {
  const ModelDims& d = theta.dims();
  Eigen::VectorXd out = theta.values();
  for (int j = 0; j < d.q; ++j) {
    for (int k = 2; k < d.K; ++k) {
      const double gap = theta.cut(j, k) - theta.cut(j, k - 1);
      if (!(gap > 0.0)) {
        throw std::domain_error("to_psi: thresholds of margin " + std::to_string(j) +
                                " are not strictly increasing");
      }
      out[d.threshold_index(j, k)] = std::log(gap);
    }
  }
  return Psi(d, std::move(out));
}

inline Theta from_psi(const Psi& psi) {
  const ModelDims& d = psi.dims();
  Eigen::VectorXd out = psi.values();
  for (int j = 0; j < d.q; ++j) {
    for (int k = 2; k < d.K; ++k) {
      const int i = d.threshold_index(j, k);
      out[i] = out[i - 1] + std::exp(psi[i]);
    }
  }
  return Theta(d, std::move(out));
}

/// d theta / d psi: identity on correlations, one lower-triangular block per
/// margin whose first column is all ones and whose (i, t) entry for
/// 2 <= t <= i is exp(delta_t(j)).
inline Eigen::MatrixXd psi_jacobian(const Psi& psi) {
  const ModelDims& d = psi.dims();
  const int p = d.num_params();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(p, p);
  jac.topLeftCorner(d.num_pairs(), d.num_pairs()).setIdentity();
  for (int j = 0; j < d.q; ++j) {
    const int base = d.threshold_index(j, 1);
    for (int i = 1; i < d.K; ++i) {
      jac(base + i - 1, base) = 1.0;
      for (int t = 2; t <= i; ++t) jac(base + i - 1, base + t - 1) = std::exp(psi[base + t - 1]);
    }
  }
  return jac;
}

/// Score in psi coordinates: score_theta^T * d theta / d psi, evaluated
/// blockwise without forming the Jacobian.
inline Eigen::VectorXd chain_rule_score(const Eigen::VectorXd& score_theta, const Psi& psi) {
  const ModelDims& d = psi.dims();
  if (score_theta.size() != d.num_params()) {
    throw std::domain_error("chain_rule_score: score has length " +
                            std::to_string(score_theta.size()) + ", expected " +
                            std::to_string(d.num_params()));
  }
  Eigen::VectorXd out = score_theta;
  for (int j = 0; j < d.q; ++j) {
    const int base = d.threshold_index(j, 1);
    // Column t collects rows i >= t; column 1 sums the whole block.
    double tail = 0.0;
    for (int t = d.K - 1; t >= 1; --t) {
      tail += score_theta[base + t - 1];
      out[base + t - 1] = t == 1 ? tail : tail * std::exp(psi[base + t - 1]);
    }
  }
  return out;
}

}  // namespace ordprobit
