#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "ordprobit/model.hpp"
#include "ordprobit/pairwise.hpp"

using namespace ordprobit;

TEST(ModelDims, ParameterCounts) {
  const ModelDims d{5, 4};
  EXPECT_EQ(d.num_pairs(), 10);
  EXPECT_EQ(d.num_thresholds(), 15);
  EXPECT_EQ(d.num_params(), 25);
  EXPECT_EQ(d.threshold_index(0, 1), 10);
  EXPECT_EQ(d.threshold_index(4, 3), 24);
  EXPECT_THROW((ModelDims{1, 3}.validate()), std::invalid_argument);
  EXPECT_THROW((ModelDims{3, 1}.validate()), std::invalid_argument);
  EXPECT_THROW((ModelDims{3, 3, 0}.validate()), std::invalid_argument);
}

TEST(PairIndex, Enumeration) {
  EXPECT_EQ(pair_index(0, 1, 4), 0);
  EXPECT_EQ(pair_index(2, 3, 4), 5);
  EXPECT_EQ(pair_index(1, 3, 4), 4);
  for (int q : {2, 3, 7, 15}) {
    int expected = 0;
    for (int r = 0; r < q; ++r)
      for (int s = r + 1; s < q; ++s) EXPECT_EQ(pair_index(r, s, q), expected++);
  }
  EXPECT_THROW(pair_index(1, 1, 4), std::domain_error);
  EXPECT_THROW(pair_index(2, 1, 4), std::domain_error);
  EXPECT_THROW(pair_index(0, 4, 4), std::domain_error);
}

TEST(ThresholdSet, Validation) {
  Eigen::MatrixXd good(2, 3);
  good << -1, 0, 1, 0, 0.5, 1;
  const ThresholdSet t(good);
  EXPECT_EQ(t.K(), 4);
  EXPECT_EQ(t.cut(0, 0), -kInf);
  EXPECT_EQ(t.cut(1, 2), 0.5);
  EXPECT_EQ(t.cut(1, 4), kInf);
  Eigen::MatrixXd tie = good;
  tie(0, 1) = -1;
  EXPECT_THROW(ThresholdSet{tie}, std::domain_error);
  Eigen::MatrixXd inf = good;
  inf(1, 2) = kInf;
  EXPECT_THROW(ThresholdSet{inf}, std::domain_error);
}

TEST(CorrelationParams, MatrixRoundTrip) {
  Eigen::MatrixXd sigma(3, 3);
  sigma << 1, 0.2, -0.4, 0.2, 1, 0.1, -0.4, 0.1, 1;
  const auto c = CorrelationParams::from_matrix(sigma);
  EXPECT_EQ(c.rhos().size(), 3);
  EXPECT_EQ(c.rho(0, 2), -0.4);
  EXPECT_EQ(c.matrix(), sigma);
  EXPECT_THROW(CorrelationParams(3, Eigen::Vector3d(0.2, 1.0, 0.0)), std::domain_error);
}

TEST(Theta, PackingOrder) {
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(3, 3);
  sigma(0, 1) = sigma(1, 0) = 0.1;
  sigma(0, 2) = sigma(2, 0) = 0.2;
  sigma(1, 2) = sigma(2, 1) = 0.3;
  Eigen::MatrixXd cuts(3, 2);
  cuts << -1, 1, -2, 2, -3, 3;
  const Theta theta(CorrelationParams::from_matrix(sigma), ThresholdSet(cuts));
  Eigen::VectorXd expected(9);
  expected << 0.1, 0.2, 0.3, -1, 1, -2, 2, -3, 3;
  EXPECT_EQ(theta.values(), expected);
  EXPECT_EQ(theta.thresholds().cuts(), cuts);
  EXPECT_EQ(theta.correlations().matrix(), sigma);
}

TEST(Psi, KnownValues) {
  const ModelDims d{2, 4};
  Eigen::VectorXd v(7);
  v << 0.3, -1, 0, 1, 0, 0.5, 1;
  const Psi psi = to_psi(Theta(d, v));
  EXPECT_EQ(psi[0], 0.3);
  EXPECT_EQ(psi[1], -1.0);
  EXPECT_EQ(psi[2], 0.0);
  EXPECT_EQ(psi[3], 0.0);
  EXPECT_EQ(psi[4], 0.0);
  EXPECT_NEAR(psi[5], -0.6931472, 1e-7);
  EXPECT_NEAR(psi[6], -0.6931472, 1e-7);

  Eigen::VectorXd back(7);
  back << 0.3, -1, 0, 0, 0, 0, 0;
  const Theta theta = from_psi(Psi(d, back));
  EXPECT_EQ(theta.cut(0, 1), -1.0);
  EXPECT_EQ(theta.cut(0, 2), 0.0);
  EXPECT_EQ(theta.cut(0, 3), 1.0);
}

TEST(Psi, RoundTrips) {
  Rng rng(11);
  std::normal_distribution<double> z(0.0, 1.5);
  for (int rep = 0; rep < 50; ++rep) {
    const Theta theta = fixtures::random_theta(4, 5, rng);
    const Theta back = from_psi(to_psi(theta));
    EXPECT_LE((back.values() - theta.values()).lpNorm<Eigen::Infinity>(), 1e-12);

    const ModelDims d{3, 4};
    Eigen::VectorXd x(d.num_params());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = i < d.num_pairs() ? 0.1 * z(rng) : z(rng);
    const Psi psi(d, x);
    EXPECT_LE((to_psi(from_psi(psi)).values() - x).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(Psi, ExtremeSpacingsKeepOrdering) {
  const ModelDims d{2, 5};
  for (double delta : {-30.0, -20.0, 30.0}) {
    Eigen::VectorXd x = Eigen::VectorXd::Constant(d.num_params(), delta);
    x[0] = 0.0;
    x[d.threshold_index(0, 1)] = 0.7;
    x[d.threshold_index(1, 1)] = -0.7;
    const Theta theta = from_psi(Psi(d, x));
    for (int j = 0; j < d.q; ++j)
      for (int k = 2; k < d.K; ++k) EXPECT_LT(theta.cut(j, k - 1), theta.cut(j, k));
    if (delta == -20.0) {
      EXPECT_NEAR(theta.cut(0, 2) - theta.cut(0, 1), 2.06e-9, 0.01e-9);
    }
  }
}

TEST(PsiJacobian, KnownBlocks) {
  const ModelDims d3{2, 3};
  const Eigen::MatrixXd jac3 = psi_jacobian(Psi(d3, Eigen::VectorXd::Zero(d3.num_params())));
  Eigen::Matrix2d delta;
  delta << 1, 0, 1, 1;
  EXPECT_EQ(jac3.block(1, 1, 2, 2), delta);
  EXPECT_EQ(jac3.block(3, 3, 2, 2), delta);
  EXPECT_EQ(jac3(0, 0), 1.0);

  const ModelDims d2{3, 2};
  Eigen::VectorXd x(d2.num_params());
  x << 0.1, 0.2, 0.3, -0.5, 0.0, 0.9;
  EXPECT_EQ(psi_jacobian(Psi(d2, x)), Eigen::MatrixXd::Identity(6, 6));
}

TEST(PsiJacobian, MatchesFiniteDifferencesAndIsBlockDiagonal) {
  Rng rng(5);
  std::normal_distribution<double> z(0.0, 1.0);
  const ModelDims d{3, 4};
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::VectorXd x(d.num_params());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = i < d.num_pairs() ? 0.3 * z(rng) : z(rng);
    const Eigen::MatrixXd jac = psi_jacobian(Psi(d, x));
    for (Eigen::Index c = 0; c < x.size(); ++c) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[c]));
      Eigen::VectorXd up = x, down = x;
      up[c] += h;
      down[c] -= h;
      const Eigen::VectorXd col =
          (from_psi(Psi(d, up)).values() - from_psi(Psi(d, down)).values()) / (2 * h);
      for (Eigen::Index r = 0; r < x.size(); ++r)
        EXPECT_NEAR(jac(r, c), col[r], 1e-6 * std::max(1.0, std::abs(col[r])));
    }
    // Outside the correlation identity and the per-margin blocks: exact zeros.
    auto block_of = [&](Eigen::Index i) {
      return i < d.num_pairs() ? -1 - static_cast<int>(i) : static_cast<int>((i - d.num_pairs()) / (d.K - 1));
    };
    for (Eigen::Index r = 0; r < x.size(); ++r)
      for (Eigen::Index c = 0; c < x.size(); ++c)
        if (block_of(r) != block_of(c)) {
          EXPECT_EQ(jac(r, c), 0.0);
        }
  }
}

TEST(ChainRule, Basics) {
  const ModelDims d{3, 4};
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(d.num_params(), -0.4, 0.6);
  const Psi psi(d, x);
  EXPECT_EQ(chain_rule_score(Eigen::VectorXd::Zero(d.num_params()), psi),
            Eigen::VectorXd::Zero(d.num_params()));
  const Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(d.num_params(), 2.0, -3.0);
  const Eigen::VectorXd dense = psi_jacobian(psi).transpose() * g;
  EXPECT_LE((chain_rule_score(g, psi) - dense).lpNorm<Eigen::Infinity>(), 1e-12);

  const ModelDims d2{3, 2};
  const Eigen::VectorXd g2 = Eigen::VectorXd::LinSpaced(d2.num_params(), 1.0, 2.0);
  EXPECT_EQ(chain_rule_score(g2, Psi(d2, Eigen::VectorXd::Zero(d2.num_params()))), g2);
  EXPECT_THROW(chain_rule_score(Eigen::VectorXd::Zero(3), psi), std::domain_error);
}

TEST(ChainRule, MatchesFiniteDifferencesOfComposedObjective) {
  Rng rng(21);
  for (int rep = 0; rep < 3; ++rep) {
    const Theta truth = fixtures::model_truth(3, 4, rng);
    const auto data = fixtures::simulate(truth, 100, rng);
    const PairCounts counts = compute_counts(data);
    const Theta theta = fixtures::random_theta(3, 4, rng, 0.7);
    const Psi psi = to_psi(theta);
    const Eigen::VectorXd analytic = chain_rule_score(pairwise_score(theta, counts), psi);
    auto objective = [&](const Eigen::VectorXd& x) {
      return pairwise_loglik(from_psi(Psi(psi.dims(), x)), counts);
    };
    const Eigen::VectorXd numeric = oracle::gradient_5pt(objective, psi.values());
    for (Eigen::Index t = 0; t < analytic.size(); ++t)
      EXPECT_NEAR(analytic[t], numeric[t], 1e-5 * std::max(1.0, std::abs(numeric[t]))) << t;
  }
}
