#include "support/helpers.hpp"

#include "srr/error.hpp"
#include "srr/synth.hpp"
#include "srr/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>

using namespace srr;
using testing_support::random_matrix;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no srr::Error thrown";
  return ErrorCode::IoError;
}

template <class T>
bool same_bits(const RankerParameters<T>& a, const RankerParameters<T>& b) {
  const auto x = a.blocks_const();
  const auto y = b.blocks_const();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i]->size() != y[i]->size()) return false;
    if (std::memcmp(x[i]->data(), y[i]->data(), sizeof(T) * x[i]->size()) != 0) return false;
  }
  return true;
}

RankerParameters<double> filled(const RankerConfig& c, double value) {
  auto p = RankerParameters<double>::zeros(c);
  p.for_each_block([&](std::string_view, Tensor2<double>& t) { t.setConstant(value); });
  return p;
}

}  // namespace

TEST(BuildTarget, SharesMassOverSafe) {
  const std::vector<std::uint8_t> a{1, 0, 1};
  const auto t = build_target(a);
  EXPECT_EQ(t.k, 2u);
  EXPECT_EQ(t.p_star, (std::vector<double>{0.5, 0.0, 0.5}));
  const std::vector<std::uint8_t> b{1};
  EXPECT_EQ(build_target(b).p_star, (std::vector<double>{1.0}));
  const std::vector<std::uint8_t> none{0, 0};
  EXPECT_EQ(code_of([&] { build_target(none); }), ErrorCode::NoSafeCandidate);
}

TEST(ListLoss, MatchesScalarOracle) {
  const RankerConfig c = testing_support::small_config(8, 4, 2, 6);
  const auto p = testing_support::random_params<double>(c, 61);
  Rng rng(62);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = 2 + rng.below(4);
    const Tensor2<double> e = random_matrix<double>(static_cast<Eigen::Index>(m + 1), 8, rng);
    std::vector<std::uint8_t> labels(m, 0);
    labels[rng.below(m)] = 1;
    const auto out = list_loss<double>(e, labels, p, c);
    const double expect =
        oracle::list_loss(testing_support::to_mat(e), labels, testing_support::to_oracle(p, 2), c.temperature);
    EXPECT_NEAR(out.loss, expect, 1e-5);
  }
}

TEST(ListLoss, UniformTargetZeroOnlyForEqualScores) {
  const RankerConfig c = testing_support::small_config();
  const auto p = testing_support::random_params<double>(c, 63);
  Rng rng(64);
  Tensor2<double> e = random_matrix<double>(3, 8, rng);
  const std::vector<std::uint8_t> all{1, 1};
  EXPECT_GT(list_loss<double>(e, all, p, c).loss, 0.0);

  e.row(2) = e.row(1);
  const auto at_optimum = list_loss<double>(e, all, p, c);
  EXPECT_NEAR(at_optimum.loss, 0.0, 1e-12);
  double norm = 0.0;
  at_optimum.grads.for_each_block([&](std::string_view, const Tensor2<double>& g) { norm += g.squaredNorm(); });
  EXPECT_LT(std::sqrt(norm), 1e-6);
}

TEST(ListLoss, LabelCountMustMatch) {
  const RankerConfig c = testing_support::small_config();
  const auto p = testing_support::random_params<double>(c, 65);
  Rng rng(66);
  const std::vector<std::uint8_t> labels{1, 0, 0};
  EXPECT_EQ(code_of([&] { list_loss<double>(random_matrix<double>(3, 8, rng), labels, p, c); }),
            ErrorCode::DimensionMismatch);
}

TEST(SgdStep, PlainGradientDescent) {
  const RankerConfig c = testing_support::small_config();
  auto theta = testing_support::random_params<double>(c, 67);
  const auto start = theta;
  const auto g = filled(c, 0.25);
  auto v = RankerParameters<double>::zeros(c);
  TrainConfig t;
  t.momentum = 0.0;
  t.weight_decay = 0.0;
  t.learning_rate = 0.1;
  sgd_step(theta, g, v, t);
  EXPECT_LT((theta.wq - (start.wq.array() - 0.025).matrix()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(SgdStep, ZeroGradientKeepsParameters) {
  const RankerConfig c = testing_support::small_config();
  auto theta = testing_support::random_params<double>(c, 68);
  const auto start = theta;
  auto v = RankerParameters<double>::zeros(c);
  TrainConfig t;
  t.weight_decay = 0.0;
  for (double mu : {0.0, 0.5, 0.9, 1.0}) {
    t.momentum = mu;
    sgd_step(theta, filled(c, 0.0), v, t);
  }
  EXPECT_TRUE(same_bits(theta, start));
}

TEST(SgdStep, TwoMomentumStepsMatchUnrolledRecurrence) {
  const RankerConfig c = testing_support::small_config();
  auto theta = filled(c, 0.3);
  auto v = RankerParameters<double>::zeros(c);
  const auto g = filled(c, 0.5);
  TrainConfig t;
  t.momentum = 0.9;
  t.weight_decay = 1e-4;
  t.learning_rate = 0.01;
  sgd_step(theta, g, v, t);
  sgd_step(theta, g, v, t);

  double th = 0.3, vel = 0.0;
  vel = 0.9 * vel + 0.5 + 1e-4 * th;
  th -= 0.01 * vel;
  vel = 0.9 * vel + 0.5 + 1e-4 * th;
  th -= 0.01 * vel;
  theta.for_each_block([&](std::string_view name, const Tensor2<double>& p) {
    EXPECT_NEAR(p(0, 0), th, 1e-15) << name;
  });
  EXPECT_NEAR(v.w1(0, 0), vel, 1e-15);
}

TEST(SgdStep, NonFiniteGradientLeavesStateUntouched) {
  const RankerConfig c = testing_support::small_config();
  auto theta = testing_support::random_params<double>(c, 69);
  auto v = filled(c, 0.1);
  const auto theta0 = theta;
  const auto v0 = v;
  auto g = filled(c, 0.2);
  g.w2(1, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    sgd_step(theta, g, v, TrainConfig{});
    FAIL() << "expected NonFiniteGradient";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteGradient);
    EXPECT_NE(std::string(e.what()).find("w2"), std::string::npos);
  }
  EXPECT_TRUE(same_bits(theta, theta0));
  EXPECT_TRUE(same_bits(v, v0));

  g = filled(c, 0.2);
  g.b1(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_EQ(code_of([&] { sgd_step(theta, g, v, TrainConfig{}); }), ErrorCode::NonFiniteGradient);
}

TEST(TrainConfigTest, Validation) {
  TrainConfig t;
  EXPECT_NO_THROW(t.validate());
  t.momentum = 1.0;
  EXPECT_NO_THROW(t.validate());
  t.momentum = 1.5;
  EXPECT_EQ(code_of([&] { t.validate(); }), ErrorCode::ConfigError);
  t = TrainConfig{};
  t.learning_rate = 0.0;
  EXPECT_EQ(code_of([&] { t.validate(); }), ErrorCode::ConfigError);
  t = TrainConfig{};
  t.weight_decay = -1.0;
  EXPECT_EQ(code_of([&] { t.validate(); }), ErrorCode::ConfigError);
}

class FitTest : public ::testing::Test {
 protected:
  static Dataset small_synthetic(std::uint64_t lists = 120) {
    SyntheticSpec s;
    s.dim = 16;
    s.num_lists = lists;
    return generate(s).dataset;
  }
  static RankerConfig compact(std::uint32_t d = 16) { return testing_support::small_config(d, 32, 4, 64); }
};

TEST_F(FitTest, ZeroEpochsReturnsInitialization) {
  const Dataset d = small_synthetic(20);
  TrainConfig t;
  t.epochs = 0;
  t.seed = 5;
  const FitResult r = fit(d, t, compact());
  Rng rng(5);
  EXPECT_TRUE(same_bits(r.params, RankerParameters<float>::initialize(compact(), rng)));
  EXPECT_TRUE(r.log.empty());
}

TEST_F(FitTest, SameSeedSameParameters) {
  const Dataset d = small_synthetic(40);
  TrainConfig t;
  t.epochs = 2;
  t.seed = 9;
  const FitResult a = fit(d, t, compact());
  const FitResult b = fit(d, t, compact());
  EXPECT_TRUE(same_bits(a.params, b.params));
  ASSERT_EQ(a.log.size(), 2u);
  EXPECT_EQ(a.log[1].mean_loss, b.log[1].mean_loss);
  t.seed = 10;
  EXPECT_FALSE(same_bits(a.params, fit(d, t, compact()).params));
}

TEST_F(FitTest, LearnsSeparableData) {
  const Dataset d = small_synthetic();
  TrainConfig t;
  t.epochs = 5;
  const FitResult r = fit(d, t, compact());
  ASSERT_EQ(r.log.size(), 5u);
  EXPECT_GE(r.log.back().train_pairwise_accuracy, 0.95);
  EXPECT_EQ(r.log.back().epoch, 5u);
}

TEST_F(FitTest, EarlyLossNonIncreasingWithDefaults) {
  const Dataset d = generate(SyntheticSpec{}).dataset;
  RankerConfig c;
  c.input_dim = d.dim();
  TrainConfig t;
  t.epochs = 5;
  std::vector<EpochRecord> seen;
  fit(d, t, c, [&](const EpochRecord& e) { seen.push_back(e); });
  ASSERT_EQ(seen.size(), 5u);
  for (std::size_t i = 1; i < seen.size(); ++i) EXPECT_LE(seen[i].mean_loss, seen[i - 1].mean_loss) << i;
  EXPECT_GE(seen.back().train_pairwise_accuracy, 0.95);
}

TEST_F(FitTest, RejectsBadInput) {
  const Dataset d = small_synthetic(10);
  EXPECT_EQ(code_of([&] { fit(d, TrainConfig{}, compact(17)); }), ErrorCode::DimensionMismatch);

  Dataset bad(16);
  Rng rng(3);
  for (std::uint64_t id = 0; id < 3; ++id) {
    CandidateList l;
    l.list_id = 100 + id;
    l.embeddings = random_matrix<float>(3, 16, rng);
    l.labels = id == 1 ? std::vector<std::uint8_t>{1, 1} : std::vector<std::uint8_t>{1, 0};
    bad.add(std::move(l));
  }
  try {
    fit(bad, TrainConfig{}, compact());
    FAIL() << "expected DomainError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DomainError);
    EXPECT_NE(std::string(e.what()).find("list 101"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("AllSafe"), std::string::npos);
  }
  EXPECT_EQ(code_of([&] { fit(Dataset(16), TrainConfig{}, compact()); }), ErrorCode::DomainError);
}

TEST_F(FitTest, HugeLearningRateIsReported) {
  const Dataset d = small_synthetic(40);
  TrainConfig t;
  t.learning_rate = 1e30;
  t.epochs = 3;
  const ErrorCode code = code_of([&] { fit(d, t, compact()); });
  EXPECT_TRUE(code == ErrorCode::DivergedTraining || code == ErrorCode::NonFiniteGradient ||
              code == ErrorCode::ZeroNorm)
      << to_string(code);
}
