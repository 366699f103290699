#include "nazr/svm.hpp"

#include <gtest/gtest.h>

#include "nazr/error.hpp"
#include "test_support.hpp"

namespace nazr {
namespace {

struct Toy {
  Matrix x;
  std::vector<int> y;
};

Toy separable(std::size_t n, Rng& rng) {
  Toy t{Matrix(n, 2), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    t.y[i] = y;
    t.x(i, 0) = rng.uniform(0.5, 2.0) * (y ? 1.0 : -1.0);
    t.x(i, 1) = rng.normal();
  }
  return t;
}

TEST(OvaObjective, ZeroModel) {
  Rng rng(1);
  const auto t = separable(20, rng);
  SvmModel m(2, 2);
  EXPECT_DOUBLE_EQ(ova_objective(m, 0, t.x, t.y, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(ova_objective(m, 0, t.x, t.y, 3.0), 3.0);
}

TEST(OvaSubgradient, MatchesFiniteDifferencesAwayFromKinks) {
  Rng rng(2);
  const auto t = separable(30, rng);
  SvmModel m(2, 2);
  for (auto& w : m.weights) w = rng.normal(0.0, 0.3);
  const auto g = ova_subgradient(m, 1, t.x, t.y, 1.5);
  for (std::size_t i = 0; i < 3; ++i) {
    SvmModel up = m, down = m;
    up.weights[m.stride() + i] += 1e-7;
    down.weights[m.stride() + i] -= 1e-7;
    const double fd = (ova_objective(up, 1, t.x, t.y, 1.5) -
                       ova_objective(down, 1, t.x, t.y, 1.5)) / 2e-7;
    EXPECT_NEAR(g[i], fd, 1e-5);
  }
}

TEST(TrainSvm, SeparableSetFullyFitted) {
  Rng rng(3);
  const auto t = separable(60, rng);
  const auto res = train_ova_svm(t.x, t.y, 2, {.c = 10.0, .epochs = 2000});
  for (std::size_t i = 0; i < 60; ++i)
    EXPECT_EQ(svm_predict(res.model, t.x.row(i)).label, t.y[i]) << i;
  for (std::size_t c = 0; c < 2; ++c)
    EXPECT_LE(res.final_objective[c], res.initial_objective[c]);
}

TEST(TrainSvm, DuplicatedDataSameDecision) {
  Rng rng(4);
  const auto t = separable(40, rng);
  Toy d{Matrix(80, 2), std::vector<int>(80)};
  for (std::size_t i = 0; i < 80; ++i) {
    d.x(i, 0) = t.x(i % 40, 0);
    d.x(i, 1) = t.x(i % 40, 1);
    d.y[i] = t.y[i % 40];
  }
  const auto a = train_ova_svm(t.x, t.y, 2, {});
  const auto b = train_ova_svm(d.x, d.y, 2, {});
  for (std::size_t i = 0; i < a.model.weights.size(); ++i)
    EXPECT_NEAR(a.model.weights[i], b.model.weights[i], 1e-6);
}

TEST(TrainSvm, DeterministicAndErrors) {
  Rng rng(5);
  const auto t = separable(30, rng);
  const auto a = train_ova_svm(t.x, t.y, 2, {});
  const auto b = train_ova_svm(t.x, t.y, 2, {});
  EXPECT_EQ(a.model.weights, b.model.weights);
  const std::vector<int> one(30, 1);
  EXPECT_THROW(train_ova_svm(t.x, one, 2, {}), DataError);
  std::vector<int> bad = t.y;
  bad[0] = 5;
  EXPECT_THROW(train_ova_svm(t.x, bad, 2, {}), DataError);
}

TEST(SvmPredict, TieRuleAndArgmax) {
  SvmModel zero(4, 3);
  EXPECT_EQ(svm_predict(zero, std::vector<double>{1, 2, 3}).label, 0);
  const double s[] = {-1.0, 3.0, 0.0, 2.0};
  EXPECT_EQ(argmax_lowest(s), 1);
}

TEST(SvmPredict, MatchesDotProducts) {
  Rng rng(6);
  SvmModel m(4, 5);
  for (auto& w : m.weights) w = rng.normal();
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(5);
    for (auto& v : x) v = rng.normal();
    const auto p = svm_predict(m, x);
    int best = 0;
    double best_s = -1e300;
    for (int c = 0; c < 4; ++c) {
      double s = m.weights[c * 6 + 5];
      for (int k = 0; k < 5; ++k) s += m.weights[c * 6 + k] * x[k];
      EXPECT_NEAR(p.scores[c], s, 1e-12);
      if (s > best_s) {
        best_s = s;
        best = c;
      }
    }
    EXPECT_EQ(p.label, best);
  }
}

TEST(SvmFile, RoundTrip) {
  Rng rng(7);
  SvmModel m(3, 4);
  for (auto& w : m.weights) w = rng.normal();
  std::uint64_t h = 0;
  const auto back = decode_svm(encode_svm(m, 99), &h);
  EXPECT_EQ(h, 99u);
  EXPECT_EQ(back.weights, m.weights);
  auto bytes = encode_svm(m, 99);
  bytes[4] = 0x7f;
  EXPECT_THROW(decode_svm(bytes), FormatError);
}

}  // namespace
}  // namespace nazr
