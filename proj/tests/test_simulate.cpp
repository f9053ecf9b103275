#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "ordprobit/simulate.hpp"

using namespace ordprobit;

TEST(RandomSparseCorrelation, DenseWhenNoZerosRequested) {
  Rng rng(1);
  for (int q : {2, 5, 12}) {
    const auto c = random_sparse_correlation(q, 0.0, rng);
    EXPECT_GT(min_eigenvalue(c.matrix()), 0.0);
    EXPECT_EQ((c.rhos().array() == 0.0).count(), 0);
  }
}

TEST(RandomSparseCorrelation, TwoMarginsForcedToIdentity) {
  Rng rng(2);
  const auto c = random_sparse_correlation(2, 0.999, rng);
  EXPECT_EQ(c.rhos()[0], 0.0);
  EXPECT_EQ(c.matrix(), Eigen::MatrixXd::Identity(2, 2));
}

TEST(RandomSparseCorrelation, SparsityAndDefiniteness) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = make_stream(seed, 7, 0);
    const auto c = random_sparse_correlation(10, 0.3, rng);
    const Eigen::MatrixXd m = c.matrix();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    EXPECT_GE(eig.eigenvalues().minCoeff(), 1e-6);
    const auto zeros = (c.rhos().array() == 0.0).count();
    EXPECT_GE(zeros, 9) << seed;   // 20% of 45
    EXPECT_LE(zeros, 18) << seed;  // 40% of 45
    EXPECT_EQ(m.diagonal(), Eigen::VectorXd::Ones(10));
    EXPECT_LT(c.rhos().cwiseAbs().maxCoeff(), 1.0);
  }
  Rng rng(3);
  EXPECT_THROW(random_sparse_correlation(1, 0.3, rng), std::invalid_argument);
  EXPECT_THROW(random_sparse_correlation(4, 1.0, rng), std::invalid_argument);
}

TEST(SampleDataset, MarginalFrequencies) {
  Rng rng(4);
  Eigen::MatrixXd cuts(2, 3);
  cuts << 0.0, 0.5, 1.0, -1.0, 0.0, 1.0;
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(2, 2);
  sigma(0, 1) = sigma(1, 0) = 0.6;
  const auto data = sample_dataset(CorrelationParams::from_matrix(sigma), ThresholdSet(cuts), 100000, rng);
  const std::vector<double> expected0 = {0.5, 0.1915, 0.1499, 0.1587};
  const std::vector<double> expected1 = {0.1587, 0.3413, 0.3413, 0.1587};
  const auto t0 = margin_tally(data, 0);
  const auto t1 = margin_tally(data, 1);
  for (int l = 0; l < 4; ++l) {
    EXPECT_NEAR(t0[l] / 100000.0, expected0[l], 0.01);
    EXPECT_NEAR(t1[l] / 100000.0, expected1[l], 0.01);
  }
}

TEST(SampleDataset, CellFrequenciesMatchModel) {
  Rng rng(5);
  const Theta truth = fixtures::model_truth(2, 3, rng, 0.0);
  const int n = 100000;
  const PairCounts counts = compute_counts(fixtures::simulate(truth, n, rng));
  // Pearson chi-square with 8 degrees of freedom; 26.1 is the 0.999 quantile.
  double chi2 = 0.0;
  for (int l = 1; l <= 3; ++l)
    for (int m = 1; m <= 3; ++m) {
      const double e = n * cell_prob(truth, 0, 1, l, m);
      chi2 += (counts(0, l, m) - e) * (counts(0, l, m) - e) / e;
    }
  EXPECT_LT(chi2, 26.1);
}

TEST(SampleDataset, IndependenceFactorizes) {
  Rng rng(6);
  Eigen::MatrixXd cuts(3, 1);
  cuts << -0.5, 0.0, 0.7;
  const int n = 50000;
  const auto data = sample_dataset(CorrelationParams(3, Eigen::Vector3d::Zero()), ThresholdSet(cuts), n, rng);
  const PairCounts counts = compute_counts(data);
  for (int r = 0; r < 3; ++r)
    for (int s = r + 1; s < 3; ++s) {
      const auto tr = margin_tally(data, r);
      const auto ts = margin_tally(data, s);
      for (int l = 1; l <= 2; ++l)
        for (int m = 1; m <= 2; ++m) {
          const double expected = static_cast<double>(tr[l - 1]) * ts[m - 1] / n;
          EXPECT_LE(std::abs(counts(pair_index(r, s, 3), l, m) - expected), 5.0 * std::sqrt(expected));
        }
    }
}

TEST(SampleDataset, DeterministicAndValidated) {
  const Theta truth = [] {
    Rng rng(7);
    return fixtures::model_truth(4, 3, rng);
  }();
  Rng a = make_stream(42, 1, 2), b = make_stream(42, 1, 2), c = make_stream(42, 1, 3);
  const auto da = fixtures::simulate(truth, 500, a);
  const auto db = fixtures::simulate(truth, 500, b);
  const auto dc = fixtures::simulate(truth, 500, c);
  EXPECT_EQ(da.rows(), db.rows());
  EXPECT_NE(da.rows(), dc.rows());
  EXPECT_EQ(da.n(), 500);
  EXPECT_EQ(da.q(), 4);
  EXPECT_THROW(fixtures::simulate(truth, 0, a), std::invalid_argument);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(3, 3);
  bad(0, 1) = bad(1, 0) = 0.9;
  bad(0, 2) = bad(2, 0) = 0.9;
  bad(1, 2) = bad(2, 1) = -0.9;
  EXPECT_THROW(sample_dataset(CorrelationParams::from_matrix(bad), ThresholdSet(Eigen::MatrixXd::Zero(3, 1)), 10, a),
               std::domain_error);
}

TEST(StudyConfig, Validation) {
  EXPECT_NO_THROW(StudyConfig{}.validate());
  StudyConfig c;
  c.replicates = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.sample_sizes = {};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.threshold_menu = {{0.0, 1.0}};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.threshold_menu = {{0.0, 1.0, 0.5}};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.zero_fraction = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(RunStudy, SingleReplicate) {
  StudyConfig c;
  c.q = 3;
  c.K = 3;
  c.threshold_menu = {{-0.5, 0.5}};
  c.sample_sizes = {400};
  c.replicates = 1;
  c.seed = 11;
  const StudyResult r = run_study(c);
  ASSERT_EQ(r.scenarios.size(), 1u);
  const auto& sc = r.scenarios[0];
  ASSERT_EQ(sc.usable, 1);
  for (Eigen::Index t = 0; t < sc.coverage.size(); ++t)
    EXPECT_TRUE(sc.coverage[t] == 0.0 || sc.coverage[t] == 1.0);

  // The single replicate is reproducible by hand from its stream.
  Rng rng = make_stream(c.seed, 1, 0);
  const auto data = sample_dataset(r.truth.correlations(), r.truth.thresholds(), 400, rng);
  const FitResult fit = maximize(compute_counts(data), data, c.fit);
  const Eigen::VectorXd err = fit.theta_hat.values() - r.truth.values();
  EXPECT_LE((sc.mse - err.cwiseAbs2()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(RunStudy, DeterministicAcrossThreadCounts) {
  StudyConfig c;
  c.q = 3;
  c.K = 2;
  c.threshold_menu = {{0.0}, {0.5}};
  c.sample_sizes = {200, 400};
  c.replicates = 6;
  c.seed = 5;
  c.threads = 1;
  const StudyResult serial = run_study(c);
  c.threads = 3;
  const StudyResult parallel = run_study(c);
  EXPECT_EQ(serial.truth.values(), parallel.truth.values());
  ASSERT_EQ(serial.scenarios.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(serial.scenarios[i].mse, parallel.scenarios[i].mse);
    EXPECT_EQ(serial.scenarios[i].mean_se, parallel.scenarios[i].mean_se);
    EXPECT_EQ(serial.scenarios[i].coverage, parallel.scenarios[i].coverage);
    EXPECT_EQ(serial.scenarios[i].n, c.sample_sizes[i]);
  }
  // Fixed truth for every sample size.
  EXPECT_EQ(draw_study_truth(c).values(), serial.truth.values());
}

TEST(RunStudy, TwoMarginCoverage) {
  // One pair at rho = 0.5 through a custom truth: replicate loop by hand.
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(2, 2);
  sigma(0, 1) = sigma(1, 0) = 0.5;
  const Theta truth(CorrelationParams::from_matrix(sigma), ThresholdSet(Eigen::MatrixXd::Zero(2, 1)));
  int covered = 0;
  for (int rep = 0; rep < 20; ++rep) {
    Rng rng = make_stream(9, 1, rep);
    const ReplicateOutcome o = run_replicate(truth, 5000, 0.95, FitConfig{}, rng);
    ASSERT_TRUE(o.usable) << o.failure;
    covered += o.covered[0];
  }
  EXPECT_GE(covered, 16);
}

TEST(RunStudy, TwoMarginCoverageOverHundredReplicates) {
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(2, 2);
  sigma(0, 1) = sigma(1, 0) = 0.5;
  const Theta truth(CorrelationParams::from_matrix(sigma), ThresholdSet(Eigen::MatrixXd::Zero(2, 1)));
  int covered = 0;
  for (int rep = 0; rep < 100; ++rep) {
    Rng rng = make_stream(21, 1, rep);
    const ReplicateOutcome o = run_replicate(truth, 5000, 0.95, FitConfig{}, rng);
    ASSERT_TRUE(o.usable) << o.failure;
    covered += o.covered[0];
  }
  // Exact binomial 99% band for 100 trials at 0.95.
  EXPECT_GE(covered, 89);
  EXPECT_LE(covered, 99);
}

TEST(RunStudy, PrecisionImprovesWithSampleSize) {
  StudyConfig c;
  c.q = 3;
  c.K = 4;
  c.sample_sizes = {300, 500, 1000};
  c.replicates = 100;
  c.seed = 17;
  const StudyResult r = run_study(c);
  ASSERT_EQ(r.scenarios.size(), 3u);
  const auto& small = r.scenarios[0];
  const auto& large = r.scenarios[2];
  for (int p = 0; p < 3; ++p) EXPECT_LT(large.mse[p], small.mse[p]) << p;
  for (Eigen::Index t = 0; t < r.truth.size(); ++t) {
    EXPECT_LT(r.scenarios[1].mean_se[t], r.scenarios[0].mean_se[t]) << t;
    EXPECT_LT(r.scenarios[2].mean_se[t], r.scenarios[1].mean_se[t]) << t;
  }
  for (const auto& sc : r.scenarios) {
    EXPECT_GE(sc.mse.minCoeff(), 0.0);
    EXPECT_GE(sc.coverage.minCoeff(), 0.0);
    EXPECT_LE(sc.coverage.maxCoeff(), 1.0);
  }
}
