// Empirical Godambe information and Wald intervals.
//
//   J = (1/n) sum_i u_i u_i^T                      (per-observation scores)
//   H = (1/n) sum_i sum_{r<s} u_irs u_irs^T        (per-pair scores, Bartlett)
//   G = H J^{-1} H,  var(theta_hat) ~ G^{-1} / n
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ordprobit/counts.hpp"
#include "ordprobit/gauss.hpp"
#include "ordprobit/model.hpp"
#include "ordprobit/pairwise.hpp"

namespace ordprobit {

/// Above this condition number J is inverted through its pseudo-inverse.
inline constexpr double kMaxConditionNumber = 1e12;

struct GodambeMatrices {
  Eigen::MatrixXd J_hat;
  Eigen::MatrixXd H_hat;
  Eigen::MatrixXd G_hat;
  bool pseudo_inverse_used = false;
  double j_condition = 0.0;
};

struct WaldInterval {
  double estimate = 0.0;
  double std_error = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;

  bool covers(double value) const { return lower <= value && value <= upper; }
};

class GodambeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Eigen::MatrixXd variability_J(const Theta& theta_hat, const OrdinalDataset& data) {
  if (!(theta_hat.dims() == data.dims())) throw std::invalid_argument("variability_J: dims mismatch");
  const CellProbCache cache(theta_hat);
  const int np = theta_hat.dims().num_params();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(np, np);
  for (int i = 0; i < data.n(); ++i) {
    const Eigen::VectorXd u = per_observation_score(cache, data.row(i));
    J.selfadjointView<Eigen::Lower>().rankUpdate(u);
  }
  J = J.selfadjointView<Eigen::Lower>();
  return J / static_cast<double>(data.n());
}

inline Eigen::MatrixXd sensitivity_H(const Theta& theta_hat, const PairCounts& counts) {
  check_compatible(theta_hat, counts);
  const CellProbCache cache(theta_hat);
  const ModelDims& d = theta_hat.dims();
  const int np = d.num_params();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(np, np);
  for (int p = 0; p < d.num_pairs(); ++p) {
    for (int l = 1; l <= d.K; ++l) {
      for (int m = 1; m <= d.K; ++m) {
        const auto n = counts(p, l, m);
        if (n == 0) continue;
        const CellGradient g = cell_gradient(cache, p, l, m);
        for (int a = 0; a < g.size; ++a)
          for (int c = 0; c < g.size; ++c)
            H(g.index[a], g.index[c]) += static_cast<double>(n) * (g.value[a] * g.value[c]);
      }
    }
  }
  return H / static_cast<double>(counts.n());
}

/// H J^{-1} H, symmetrized. J is inverted through its eigendecomposition so
/// that an ill-conditioned J falls back to the pseudo-inverse.
inline GodambeMatrices godambe_G(const Eigen::MatrixXd& J, const Eigen::MatrixXd& H) {
  if (J.rows() != J.cols() || H.rows() != H.cols() || J.rows() != H.rows()) {
    throw std::invalid_argument("godambe_G: J and H must be square of equal size");
  }
  GodambeMatrices out;
  out.J_hat = J;
  out.H_hat = H;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double max_ev = ev.cwiseAbs().maxCoeff();
  const double min_ev = ev.minCoeff();
  out.j_condition = min_ev > 0.0 ? max_ev / min_ev : std::numeric_limits<double>::infinity();

  Eigen::MatrixXd j_inv_h;
  if (out.j_condition <= kMaxConditionNumber) {
    j_inv_h = J.llt().solve(H);
  } else {
    out.pseudo_inverse_used = true;
    const double cutoff = max_ev / kMaxConditionNumber;
    Eigen::VectorXd inv = ev;
    for (Eigen::Index i = 0; i < inv.size(); ++i) inv[i] = ev[i] > cutoff ? 1.0 / ev[i] : 0.0;
    j_inv_h = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose() * H;
  }
  const Eigen::MatrixXd G = H * j_inv_h;
  out.G_hat = 0.5 * (G + G.transpose());
  return out;
}

inline GodambeMatrices godambe(const Theta& theta_hat, const OrdinalDataset& data,
                               const PairCounts& counts) {
  return godambe_G(variability_J(theta_hat, data), sensitivity_H(theta_hat, counts));
}

/// Wald intervals for every component of theta; correlation intervals are
/// clamped to [-1, 1].
inline std::vector<WaldInterval> wald_intervals(const Theta& theta_hat, const Eigen::MatrixXd& G,
                                                double n, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0, 1)");
  if (!(n > 0.0)) throw std::invalid_argument("sample size must be positive");
  const int np = theta_hat.dims().num_params();
  if (G.rows() != np || G.cols() != np) throw std::invalid_argument("G has wrong dimension");

  const Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G, Eigen::EigenvaluesOnly);
    std::ostringstream msg;
    msg << "Godambe matrix is not positive definite (dimension " << np
        << ", min eigenvalue " << eig.eigenvalues().minCoeff() << ", max eigenvalue "
        << eig.eigenvalues().maxCoeff() << ")";
    throw GodambeError(msg.str());
  }
  const Eigen::MatrixXd g_inv = llt.solve(Eigen::MatrixXd::Identity(np, np));
  const double z = norm_quantile(1.0 - 0.5 * (1.0 - level));
  const int nc = theta_hat.dims().num_pairs();

  std::vector<WaldInterval> out(np);
  for (int t = 0; t < np; ++t) {
    WaldInterval& w = out[t];
    w.estimate = theta_hat[t];
    w.std_error = std::sqrt(g_inv(t, t) / n);
    w.lower = w.estimate - z * w.std_error;
    w.upper = w.estimate + z * w.std_error;
    w.level = level;
    if (t < nc) {
      w.lower = std::max(w.lower, -1.0);
      w.upper = std::min(w.upper, 1.0);
    }
  }
  return out;
}

}  // namespace ordprobit
