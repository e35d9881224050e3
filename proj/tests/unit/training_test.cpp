#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "ihgnn/errors.hpp"
#include "ihgnn/eval.hpp"
#include "ihgnn/gradcheck.hpp"
#include "ihgnn/training.hpp"
#include "oracle/finite_difference.hpp"
#include "oracle/naive_model.hpp"
#include "support/problems.hpp"

namespace ihgnn {
namespace {

double max_relative_error(const ParameterSet& a, const ParameterSet& b, double floor = 1e-6) {
  std::vector<const Matrix*> bs;
  b.for_each([&](const std::string&, const Matrix& m) { bs.push_back(&m); });
  double worst = 0.0;
  std::size_t t = 0;
  a.for_each([&](const std::string&, const Matrix& m) {
    const auto x = m.values();
    const auto y = bs[t++]->values();
    for (std::size_t i = 0; i < x.size(); ++i) {
      worst = std::max(worst, std::abs(x[i] - y[i]) /
                                  std::max({std::abs(x[i]), std::abs(y[i]), floor}));
    }
  });
  return worst;
}

TEST(BceLoss, AllHalf) {
  const std::vector<double> p(5, 0.5);
  const std::vector<double> y = {1, 0, 1, 0, 0};
  EXPECT_NEAR(bce_loss(p, y), 5.0 * std::log(2.0), 1e-12);
}

TEST(BceLoss, ConfidentPair) {
  const std::vector<double> p = {0.9, 0.1};
  const std::vector<double> y = {1, 0};
  EXPECT_NEAR(bce_loss(p, y), -2.0 * std::log(0.9), 1e-12);
  EXPECT_NEAR(bce_loss(p, y), 0.21072103131565253, 1e-12);
}

TEST(BceLoss, ClampKeepsLossFinite) {
  const std::vector<double> p = {1.0, 0.0, 0.0, 1.0};
  const std::vector<double> right = {1, 0, 0, 1};
  EXPECT_LE(bce_loss(p, right), 4.0 * -std::log1p(-kLossEpsilon) + 1e-15);
  const std::vector<double> wrong = {0, 1, 1, 0};
  EXPECT_TRUE(std::isfinite(bce_loss(p, wrong)));
  const double lo = kLossEpsilon;
  const double hi = 1.0 - kLossEpsilon;
  EXPECT_NEAR(bce_loss(p, wrong), -2.0 * std::log(lo) - 2.0 * std::log(1.0 - hi), 1e-9);
}

TEST(SampleNegatives, ExcludesPositives) {
  const std::vector<Triple> positives = {{0, 0, 0}, {0, 0, 3}};
  const PositiveIndex index(positives);
  const std::vector<Triple> one = {{0, 0, 0}};
  const PositiveIndex single(one);
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    for (const auto& n : sample_negatives({0, 0, 0}, 3, single, 2, rng)) {
      EXPECT_TRUE(n.product == 1 || n.product == 2);
      EXPECT_EQ(n.user, 0u);
      EXPECT_EQ(n.query, 0u);
    }
    for (const auto& n : sample_negatives({0, 0, 3}, 5, index, 4, rng)) {
      EXPECT_FALSE(index.contains(n));
    }
  }
}

TEST(SampleNegatives, EdgeCases) {
  Rng rng(1);
  const std::vector<Triple> positives = {{0, 0, 0}, {0, 0, 1}};
  const PositiveIndex index(positives);
  EXPECT_TRUE(sample_negatives({0, 0, 0}, 3, index, 0, rng).empty());
  EXPECT_THROW(sample_negatives({0, 0, 0}, 2, index, 1, rng), NumericalError);
}

TEST(SampleNegatives, Deterministic) {
  const std::vector<Triple> positives = {{1, 2, 3}};
  const PositiveIndex index(positives);
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 20; ++i) {
    const auto x = sample_negatives({1, 2, 3}, 50, index, 10, a);
    const auto y = sample_negatives({1, 2, 3}, 50, index, 10, b);
    EXPECT_EQ(x, y);
  }
}

class GradientCheck : public ::testing::TestWithParam<std::size_t> {};

TEST_P(GradientCheck, MatchesOracleFiniteDifferences) {
  ModelConfig base;
  base.dim = 3;
  base.layers = 2;
  const auto variant = ablation_variants(base)[GetParam()];
  const auto& c = variant.config;
  const auto p = make_gradcheck_problem(c, 7);
  const auto analytic = compute_gradients(p.graph, p.vocab, p.params, c, p.samples);
  const auto ng = oracle::naive_hypergraph(p.log.distinct_triples(), p.log.counts(),
                                           kinds_of(c.subset));
  const auto numeric = oracle::numeric_gradients(p.params, [&](const ParameterSet& params) {
    return oracle::naive_loss(ng, p.vocab, params, c, p.samples);
  });
  EXPECT_LE(max_relative_error(analytic.gradients, numeric), 1e-4) << variant.name;
  EXPECT_NEAR(analytic.loss, oracle::naive_loss(ng, p.vocab, p.params, c, p.samples), 1e-10);
}

TEST_P(GradientCheck, LibraryCheckAgrees) {
  ModelConfig base;
  base.dim = 3;
  base.layers = 2;
  const auto variant = ablation_variants(base)[GetParam()];
  const auto p = make_gradcheck_problem(variant.config, 1);
  const auto r = check_gradients(p, variant.config);
  EXPECT_LE(r.max_relative_error, 1e-4) << variant.name << " " << r.worst_tensor;
  EXPECT_EQ(r.checked, [&] {
    std::size_t n = 0;
    p.params.for_each([&](const std::string&, const Matrix& m) { n += m.values().size(); });
    return n;
  }());
}

INSTANTIATE_TEST_SUITE_P(Variants, GradientCheck, ::testing::Range<std::size_t>(0, 6));

class RandomGradients : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(RandomGradients, MatchOracle) {
  Rng rng(GetParam());
  const auto problem = testing::random_problem(rng, 12);
  ModelConfig base;
  base.dim = 2;
  base.layers = GetParam() % 4;
  const auto variants = ablation_variants(base);
  const auto& c = variants[GetParam() % variants.size()].config;
  const auto params =
      testing::random_parameters(c, problem.log.counts(), problem.vocab.word_count, rng, 0.7);
  std::vector<Sample> samples;
  for (const auto& t : problem.log.distinct_triples()) samples.push_back({t, 1.0});
  samples.push_back({{0, 0, 0}, 0.0});
  const auto g = build_hypergraph(problem.log, kinds_of(c.subset));
  const auto analytic = compute_gradients(g, problem.vocab, params, c, samples);
  const auto ng = oracle::naive_hypergraph(problem.log.distinct_triples(), problem.log.counts(),
                                           kinds_of(c.subset));
  const auto numeric = oracle::numeric_gradients(params, [&](const ParameterSet& x) {
    return oracle::naive_loss(ng, problem.vocab, x, c, samples);
  });
  EXPECT_LE(max_relative_error(analytic.gradients, numeric), 1e-4) << describe(c);
}

INSTANTIATE_TEST_SUITE_P(Random, RandomGradients, ::testing::Range<std::uint64_t>(1, 25));

TEST(Gradients, DuplicateSampleDoublesContribution) {
  ModelConfig c;
  c.dim = 3;
  const auto p = make_gradcheck_problem(c, 2);
  const std::vector<Sample> one = {p.samples[0]};
  const std::vector<Sample> two = {p.samples[0], p.samples[0]};
  const auto a = compute_gradients(p.graph, p.vocab, p.params, c, one);
  const auto b = compute_gradients(p.graph, p.vocab, p.params, c, two);
  EXPECT_NEAR(b.loss, 2.0 * a.loss, 1e-12);
  std::vector<const Matrix*> bs;
  b.gradients.for_each([&](const std::string&, const Matrix& m) { bs.push_back(&m); });
  std::size_t t = 0;
  a.gradients.for_each([&](const std::string&, const Matrix& m) {
    const auto x = m.values();
    const auto y = bs[t++]->values();
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], 2.0 * x[i], 1e-12);
  });
}

TEST(Gradients, LossIsSumOfSampleLosses) {
  ModelConfig c;
  c.dim = 3;
  const auto p = make_gradcheck_problem(c, 4);
  double sum = 0.0;
  for (const auto& s : p.samples) {
    sum += batch_loss(p.graph, p.vocab, p.params, c, std::span<const Sample>(&s, 1));
  }
  EXPECT_NEAR(batch_loss(p.graph, p.vocab, p.params, c, p.samples), sum, 1e-10);
}

TEST(Gradients, ZeroOutsideReceptiveField) {
  // Two disconnected components; the batch touches only the first one.
  const InteractionLog log({2, 2, 2}, {{0, 0, 0, 1}, {1, 1, 1, 2}});
  QueryVocabulary vocab{2, {{0}, {1}}};
  ModelConfig c;
  c.dim = 2;
  Rng rng(9);
  const auto params = testing::random_parameters(c, log.counts(), 2, rng);
  const std::vector<Sample> samples = {{{0, 0, 0}, 1.0}};
  const auto r = compute_gradients(build_hypergraph(log), vocab, params, c, samples);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(r.gradients.users(1, k), 0.0);
    EXPECT_EQ(r.gradients.products(1, k), 0.0);
    EXPECT_EQ(r.gradients.words(1, k), 0.0);
    EXPECT_NE(r.gradients.users(0, k), 0.0);
  }
}

TEST(Gradients, NonFiniteGradientNamesTensor) {
  ModelConfig c;
  c.dim = 2;
  auto p = make_gradcheck_problem(c, 1);
  p.params.layer_weights[1](0, 0) = std::numeric_limits<double>::infinity();
  try {
    compute_gradients(p.graph, p.vocab, p.params, c, p.samples);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_FALSE(std::string(e.what()).empty());
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ModelConfig c;
  c.dim = 2;
  auto p = make_gradcheck_problem(c, 1);
  const auto before = p.params;
  AdamOptimizer adam(p.params, {});
  adam.step(p.params, ParameterSet::zeros(c, p.log.counts(), p.vocab.word_count));
  EXPECT_EQ(p.params, before);
  EXPECT_EQ(adam.step_count(), 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ModelConfig c;
  c.dim = 2;
  auto p = make_gradcheck_problem(c, 1);
  const auto before = p.params;
  auto grads = ParameterSet::zeros(c, p.log.counts(), p.vocab.word_count);
  grads.users.fill(0.37);
  grads.products.fill(-2.5);
  AdamOptions o;
  o.learning_rate = 0.01;
  AdamOptimizer adam(p.params, o);
  adam.step(p.params, grads);
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  for (std::size_t i = 0; i < before.users.values().size(); ++i) {
    EXPECT_NEAR(p.params.users.values()[i] - before.users.values()[i], -0.01 * 0.37 / (0.37 + 1e-8),
                1e-15);
    EXPECT_NEAR(p.params.products.values()[i] - before.products.values()[i],
                0.01 * 2.5 / (2.5 + 1e-8), 1e-15);
  }
  EXPECT_EQ(p.params.words, before.words);
}

TEST(Adam, EqualHistoriesGiveEqualUpdates) {
  ModelConfig c;
  c.dim = 2;
  auto p = make_gradcheck_problem(c, 1);
  p.params.users(0, 0) = p.params.users(2, 1) = 0.3;
  AdamOptimizer adam(p.params, {});
  Rng rng(3);
  std::normal_distribution<double> n;
  for (int s = 0; s < 5; ++s) {
    auto grads = ParameterSet::zeros(c, p.log.counts(), p.vocab.word_count);
    grads.users(0, 0) = grads.users(2, 1) = n(rng);
    adam.step(p.params, grads);
  }
  EXPECT_EQ(p.params.users(0, 0), p.params.users(2, 1));
  EXPECT_EQ(adam.first_moment().users(0, 0), adam.first_moment().users(2, 1));
}

TEST(Initialization, Bounds) {
  ModelConfig c;
  c.dim = 8;
  Rng rng(1);
  const EntityCounts counts{30, 20, 40};
  const auto p = initialize_parameters(c, counts, 25, rng);
  auto within = [](const Matrix& m, double bound) {
    for (double x : m.values()) {
      if (std::abs(x) > bound) return false;
    }
    return true;
  };
  EXPECT_TRUE(within(p.users, std::sqrt(6.0 / (30 + 8))));
  EXPECT_TRUE(within(p.products, std::sqrt(6.0 / (40 + 8))));
  EXPECT_TRUE(within(p.words, std::sqrt(6.0 / (25 + 8))));
  for (const auto& w : p.layer_weights) EXPECT_TRUE(within(w, std::sqrt(3.0 / (7 * 8))));
  Rng again(1);
  EXPECT_EQ(p, initialize_parameters(c, counts, 25, again));
}

struct SmallData {
  SyntheticData data;
  TemporalSplit split;
};

SmallData small_synthetic() {
  SyntheticSpec spec;
  spec.clusters = 4;
  spec.users = 40;
  spec.queries = 20;
  spec.products = 60;
  spec.words = 50;
  spec.interactions_per_user = 10;
  auto data = generate_synthetic(spec);
  auto split = temporal_split(data.log);
  return {std::move(data), std::move(split)};
}

TEST(Fit, ZeroLearningRateKeepsInitialization) {
  const auto d = small_synthetic();
  ModelConfig c;
  c.dim = 4;
  TrainOptions o;
  o.epochs = 3;
  o.adam.learning_rate = 0.0;
  const auto r = fit(d.split.train, d.split.valid, d.data.vocab, c, o, 5);
  Rng rng(5);
  EXPECT_EQ(r.params, initialize_parameters(c, d.split.train.counts(), d.data.vocab.word_count, rng));
  EXPECT_EQ(r.report.epochs.size(), 3u);
}

TEST(Fit, DeterministicReport) {
  const auto d = small_synthetic();
  ModelConfig c;
  c.dim = 4;
  TrainOptions o;
  o.epochs = 3;
  o.adam.learning_rate = 0.01;
  const auto a = fit(d.split.train, d.split.valid, d.data.vocab, c, o, 5);
  const auto b = fit(d.split.train, d.split.valid, d.data.vocab, c, o, 5);
  EXPECT_EQ(a.params, b.params);
  ASSERT_EQ(a.report.epochs.size(), b.report.epochs.size());
  for (std::size_t i = 0; i < a.report.epochs.size(); ++i) {
    EXPECT_EQ(a.report.epochs[i].loss, b.report.epochs[i].loss);
    EXPECT_EQ(a.report.epochs[i].valid_ndcg, b.report.epochs[i].valid_ndcg);
  }
  EXPECT_EQ(a.report.selected_epoch, b.report.selected_epoch);
}

TEST(Fit, LossDecreasesAndSelectionIsBest) {
  const auto d = small_synthetic();
  ModelConfig c;
  c.dim = 8;
  TrainOptions o;
  o.epochs = 8;
  o.adam.learning_rate = 0.01;
  const auto r = fit(d.split.train, d.split.valid, d.data.vocab, c, o, 3);
  ASSERT_EQ(r.report.epochs.size(), 8u);
  EXPECT_LT(r.report.epochs.back().loss, r.report.epochs.front().loss);
  ASSERT_TRUE(r.report.selected_epoch.has_value());
  const double best = r.report.epochs[*r.report.selected_epoch - 1].valid_ndcg;
  for (const auto& e : r.report.epochs) {
    EXPECT_GE(best, e.valid_ndcg);
    if (e.epoch < *r.report.selected_epoch) EXPECT_LT(e.valid_ndcg, best);
  }
}

TEST(Fit, ZeroEpochsReturnsInitialization) {
  const auto d = small_synthetic();
  ModelConfig c;
  c.dim = 4;
  TrainOptions o;
  o.epochs = 0;
  const auto r = fit(d.split.train, d.split.valid, d.data.vocab, c, o, 8);
  Rng rng(8);
  EXPECT_EQ(r.params, initialize_parameters(c, d.split.train.counts(), d.data.vocab.word_count, rng));
  EXPECT_TRUE(r.report.epochs.empty());
  EXPECT_FALSE(r.report.selected_epoch.has_value());
}

TEST(Fit, EarlyStoppingHonorsPatience) {
  const auto d = small_synthetic();
  ModelConfig c;
  c.dim = 4;
  TrainOptions o;
  o.epochs = 50;
  o.patience = 2;
  o.adam.learning_rate = 0.0;  // validation never improves after epoch 1
  const auto r = fit(d.split.train, d.split.valid, d.data.vocab, c, o, 1);
  EXPECT_EQ(r.report.epochs.size(), 3u);
  EXPECT_EQ(r.report.selected_epoch, 1u);
}

TEST(Fit, DivergenceReportsLastFiniteEpochs) {
  const auto d = small_synthetic();
  ModelConfig c;
  c.dim = 4;
  TrainOptions o;
  o.epochs = 5;
  o.adam.learning_rate = std::numeric_limits<double>::infinity();
  try {
    fit(d.split.train, d.split.valid, d.data.vocab, c, o, 1);
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    for (const auto& r : e.report().epochs) EXPECT_TRUE(std::isfinite(r.loss));
  }
}

TEST(Fit, RejectsMismatchedInputs) {
  const auto d = small_synthetic();
  ModelConfig c;
  TrainOptions o;
  EXPECT_THROW(fit(InteractionLog(d.split.train.counts(), {}), d.split.valid, d.data.vocab, c, o, 1),
               DataError);
}

}  // namespace
}  // namespace ihgnn
