#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "gvfnet/gvf_totd.hpp"
#include "oracles/lambda_return.hpp"

using namespace gvfnet;

namespace {

struct BinaryProblem {
  std::vector<std::vector<double>> phi;  // dense 0/1 rows, T+1 of them
  std::vector<FeatureVector> x;
  std::vector<double> rewards;
};

BinaryProblem binary_problem(std::size_t d, std::size_t T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution bit(0.3);
  std::uniform_real_distribution<double> r(-1.0, 1.0);
  BinaryProblem p;
  for (std::size_t t = 0; t <= T; ++t) {
    std::vector<double> row(d, 0.0);
    FeatureVector fv;
    fv.length = d;
    for (std::size_t i = 0; i < d; ++i)
      if (bit(rng)) {
        row[i] = 1.0;
        fv.active.push_back(static_cast<std::uint32_t>(i));
      }
    p.phi.push_back(std::move(row));
    p.x.push_back(std::move(fv));
    if (t < T) p.rewards.push_back(r(rng));
  }
  return p;
}

FeatureVector single(std::uint32_t i, std::size_t length) { return {length, {i}}; }

}  // namespace

TEST(Horizon, Values) {
  EXPECT_NEAR(horizon(0.94), 16.67, 0.01);
  EXPECT_DOUBLE_EQ(horizon(0.0), 1.0);
  EXPECT_DOUBLE_EQ(horizon(0.5), 2.0);
  EXPECT_THROW(horizon(1.0), ValidationError);
  EXPECT_THROW(horizon(-0.1), ValidationError);
}

TEST(TdParams, Defaults) {
  TdParams td;
  EXPECT_EQ(td.gamma, 0.94);
  EXPECT_EQ(td.lambda, 0.5);
  EXPECT_DOUBLE_EQ(td.alpha, 0.1 / 625.0);
  EXPECT_THROW((TdParams{1.0, 0.5, 0.1}.validate()), ValidationError);
  EXPECT_THROW((TdParams{0.9, 1.5, 0.1}.validate()), ValidationError);
  EXPECT_THROW((TdParams{0.9, 0.5, 0.0}.validate()), ValidationError);
}

TEST(GvfLearner, PredictIsSumOfActiveWeights) {
  GvfLearner g({0, {}}, 5);
  auto w = g.weights();
  for (std::size_t i = 0; i < 5; ++i) w[i] = static_cast<double>(i + 1);
  EXPECT_EQ(g.predict(FeatureVector{5, {0, 2, 4}}), 9.0);
  EXPECT_EQ(g.predict(FeatureVector{5, {}}), 0.0);
  EXPECT_THROW(g.predict(FeatureVector{6, {0}}), ValidationError);
}

TEST(GvfLearner, ZeroCumulantKeepsZeroWeights) {
  GvfLearner g({0, {0.9, 0.7, 0.1}}, 10);
  std::mt19937_64 rng(1);
  auto p = binary_problem(10, 100, 1);
  for (std::size_t t = 0; t < 100; ++t) EXPECT_EQ(g.step(p.x[t], p.x[t + 1], 0.0), 0.0);
  for (double w : g.weights()) EXPECT_EQ(w, 0.0);
}

TEST(GvfLearner, ConstantCumulantConvergesToDiscountedSum) {
  for (double c : {0.3, 1.0}) {
    GvfLearner g({0, {0.94, 0.5, 0.05}}, 1);
    const auto x = single(0, 1);
    double v = 0.0;
    for (int t = 0; t < 5000; ++t) v = g.step(x, x, c);
    EXPECT_NEAR(v, c / (1.0 - 0.94), 1e-6);
  }
}

TEST(GvfLearner, MatchesOnlineLambdaReturnOracle) {
  for (double lambda : {0.0, 0.5, 0.9, 1.0}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const std::size_t d = 20, T = 300;
      const auto p = binary_problem(d, T, seed);
      const double gamma = 0.9, alpha = 0.02;
      const auto theta = oracle::online_lambda_return(p.phi, p.rewards, gamma, lambda, alpha);
      GvfLearner g({0, {gamma, lambda, alpha}}, d);
      for (std::size_t t = 0; t < T; ++t) {
        g.step(p.x[t], p.x[t + 1], p.rewards[t]);
        for (std::size_t i = 0; i < d; ++i)
          ASSERT_NEAR(g.weights()[i], theta[t][i], 1e-10) << "lambda " << lambda << " seed " << seed << " t " << t;
      }
    }
  }
}

TEST(GvfLearner, LambdaZeroIsTdZero) {
  const auto p = binary_problem(15, 500, 7);
  const auto w0 = oracle::td0(p.phi, p.rewards, 0.8, 0.03);
  GvfLearner g({0, {0.8, 0.0, 0.03}}, 15);
  for (std::size_t t = 0; t < 500; ++t) {
    g.step(p.x[t], p.x[t + 1], p.rewards[t]);
    for (std::size_t i = 0; i < 15; ++i) ASSERT_NEAR(g.weights()[i], w0[t][i], 1e-12);
  }
}

TEST(GvfLearner, StepReturnsPostUpdatePrediction) {
  const auto p = binary_problem(12, 50, 3);
  GvfLearner g({0, {0.9, 0.5, 0.05}}, 12);
  for (std::size_t t = 0; t < 50; ++t) {
    const double v = g.step(p.x[t], p.x[t + 1], p.rewards[t]);
    EXPECT_EQ(v, g.predict(p.x[t + 1]));
  }
}

TEST(GvfBank, MatchesIndependentLearners) {
  const std::size_t n_ch = 30, d = 60, T = 800;
  const TdParams td{0.94, 0.5, 0.1 / 10.0};
  auto p = binary_problem(d, T, 11);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> z(T, std::vector<double>(n_ch));
  for (auto& row : z)
    for (double& v : row) v = u(rng);

  GvfBank bank(n_ch, d, td);
  std::vector<GvfLearner> learners;
  for (std::size_t c = 0; c < n_ch; ++c) learners.emplace_back(GvfSpec{c, td}, d);
  for (std::size_t t = 0; t < T; ++t) {
    const auto out = bank.step(p.x[t], p.x[t + 1], z[t]);
    for (std::size_t c = 0; c < n_ch; ++c) {
      const double v = learners[c].step(p.x[t], p.x[t + 1], z[t][c]);
      ASSERT_NEAR(out[c], v, 1e-8) << "t " << t << " c " << c;
    }
  }
  for (std::size_t c = 0; c < n_ch; ++c)
    for (std::size_t i = 0; i < d; ++i) EXPECT_NEAR(bank.weight(i, c), learners[c].weights()[i], 1e-8);
  EXPECT_EQ(bank.steps(), T);
}

TEST(GvfBank, TraceSupportStaysLocal) {
  // With gamma*lambda = 0.47 a trace entry falls below 1e-12 within ~40 steps.
  const std::size_t d = 1000;
  GvfBank bank(1, d, {0.94, 0.5, 0.001});
  const std::vector<double> z = {0.5};
  for (std::uint32_t t = 0; t < 500; ++t) bank.step(single(t, d), single(t + 1, d), z);
  EXPECT_LE(bank.trace_support(), 45u);
  EXPECT_EQ(bank.trace(0), 0.0);
}

TEST(GvfBank, NormalizedPredictions) {
  EXPECT_DOUBLE_EQ(normalize_prediction(10.0, 0.9), 1.0);
  EXPECT_DOUBLE_EQ(normalize_prediction(-3.0, 0.9), 0.0);
  EXPECT_DOUBLE_EQ(normalize_prediction(100.0, 0.9), 1.5);
  EXPECT_NEAR(normalize_prediction(5.0, 0.94), 0.3, 1e-12);

  GvfBank bank(2, 1, {0.94, 0.5, 0.05});
  const auto x = single(0, 1);
  const std::vector<double> z = {0.4, 0.9};
  for (int t = 0; t < 5000; ++t) bank.step(x, x, z);
  const auto n = bank.normalized_predictions();
  EXPECT_NEAR(n[0], 0.4, 1e-6);
  EXPECT_NEAR(n[1], 0.9, 1e-6);
}

TEST(GvfBank, RejectsMismatches) {
  EXPECT_THROW(GvfBank(0, 10, {}), ValidationError);
  GvfBank bank(3, 10, {});
  const std::vector<double> z(2, 0.0);
  EXPECT_THROW(bank.step(single(0, 10), single(1, 10), z), ValidationError);
  const std::vector<double> z3(3, 0.0);
  EXPECT_THROW(bank.step(single(0, 11), single(1, 10), z3), ValidationError);
}

TEST(GvfBank, CheckpointResumesIdentically) {
  const auto p = binary_problem(40, 200, 13);
  const std::vector<double> z = {0.2, 0.7, 0.1};
  GvfBank a(3, 40, {0.9, 0.6, 0.01});
  for (std::size_t t = 0; t < 100; ++t) a.step(p.x[t], p.x[t + 1], z);
  std::stringstream ss;
  a.save(ss);
  GvfBank b = GvfBank::load(ss);
  for (std::size_t t = 100; t < 200; ++t) {
    const auto va = a.step(p.x[t], p.x[t + 1], z);
    const std::vector<double> copy(va.begin(), va.end());
    const auto vb = b.step(p.x[t], p.x[t + 1], z);
    for (std::size_t c = 0; c < 3; ++c) ASSERT_EQ(copy[c], vb[c]);
  }

  std::string bytes;
  {
    std::stringstream s2;
    a.save(s2);
    bytes = s2.str();
  }
  std::istringstream trunc(bytes.substr(0, bytes.size() - 1));
  EXPECT_THROW(GvfBank::load(trunc), ValidationError);
  std::istringstream junk("not a checkpoint at all");
  EXPECT_THROW(GvfBank::load(junk), ValidationError);
}
