#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <random>

#include "ordprobit/counts.hpp"
#include "ordprobit/model.hpp"
#include "ordprobit/simulate.hpp"

namespace fixtures {

// Arbitrary parameter point: correlations uniform in (-rho_max, rho_max),
// thresholds sorted uniforms with a minimum gap.
inline ordprobit::Theta random_theta(int q, int K, ordprobit::Rng& rng, double rho_max = 0.9) {
  const ordprobit::ModelDims dims{q, K};
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd v(dims.num_params());
  for (int p = 0; p < dims.num_pairs(); ++p) v[p] = rho_max * u(rng);
  for (int j = 0; j < q; ++j) {
    double a = -1.2 + 0.4 * u(rng);
    for (int k = 1; k < K; ++k) {
      v[dims.threshold_index(j, k)] = a;
      a += 0.3 + 0.5 * (u(rng) + 1.0);
    }
  }
  return ordprobit::Theta(dims, v);
}

// Categories drawn independently and uniformly; every category occurs in
// every margin provided n is not tiny.
inline ordprobit::OrdinalDataset uniform_dataset(int n, int q, int K, ordprobit::Rng& rng) {
  std::uniform_int_distribution<int> cat(1, K);
  ordprobit::CategoryMatrix m(n, q);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < q; ++j) m(i, j) = cat(rng);
  return ordprobit::OrdinalDataset(std::move(m), K);
}

// Positive definite truth with thresholds from a fixed menu.
inline ordprobit::Theta model_truth(int q, int K, ordprobit::Rng& rng, double zero_fraction = 0.3) {
  const auto sigma = ordprobit::random_sparse_correlation(q, zero_fraction, rng);
  Eigen::MatrixXd cuts(q, K - 1);
  for (int j = 0; j < q; ++j)
    for (int k = 0; k < K - 1; ++k) cuts(j, k) = (j % 2 ? -0.8 : -0.4) + 0.8 * k;
  return ordprobit::Theta(sigma, ordprobit::ThresholdSet(cuts));
}

inline ordprobit::OrdinalDataset simulate(const ordprobit::Theta& truth, int n, ordprobit::Rng& rng) {
  return ordprobit::sample_dataset(truth.correlations(), truth.thresholds(), n, rng);
}

}  // namespace fixtures
