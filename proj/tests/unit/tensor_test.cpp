#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "grad_check.hpp"
#include "mhop/ops.hpp"

using namespace mhop;
using mhop::testing::max_grad_error;
using mhop::testing::random_tensor;

namespace {

Tensor eye(std::size_t n) {
  auto t = Tensor::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) t.mutable_data()[i * n + i] = 1.0;
  return t;
}

}  // namespace

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor::from({2, 3}, {1, 2, 3}), std::invalid_argument);
  EXPECT_EQ(Tensor::zeros({2, 3}).size(), 6u);
}

TEST(Matmul, IdentityLeavesInputUnchanged) {
  std::mt19937_64 rng(1);
  const auto x = random_tensor({3, 4}, rng);
  const auto y = ops::matmul(eye(3), x);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(y.at(i), x.at(i));
}

TEST(Matmul, ZerosGiveZeros) {
  std::mt19937_64 rng(2);
  const auto y = ops::matmul(Tensor::zeros({2, 3}), random_tensor({3, 5}, rng));
  ASSERT_EQ(y.shape(), (Shape{2, 5}));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Matmul, MatchesTripleLoop) {
  std::mt19937_64 rng(3);
  const auto a = random_tensor({3, 2}, rng);
  const auto b = random_tensor({2, 4}, rng);
  const auto c = ops::matmul(a, b);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 2; ++k) s += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(c.at(i, j), s, 1e-12);
    }
  }
}

TEST(Matmul, RejectsInnerMismatch) {
  EXPECT_THROW(ops::matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), std::invalid_argument);
}

TEST(Softmax, UniformOnEqualLogits) {
  const auto y = ops::softmax(Tensor::zeros({1, 4}));
  for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
  const auto y = ops::softmax(Tensor::from({1, 2}, {1000.0, 0.0}));
  EXPECT_NEAR(y.at(0), 1.0, 1e-12);
  EXPECT_NEAR(y.at(1), 0.0, 1e-12);
}

TEST(Softmax, MatchesDirectFormula) {
  std::mt19937_64 rng(4);
  const auto x = random_tensor({1, 5}, rng, -3, 3);
  const auto y = ops::softmax(x);
  double z = 0.0;
  for (double v : x.data()) z += std::exp(v);
  double total = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_NEAR(y.at(i), std::exp(x.at(i)) / z, 1e-12);
    EXPECT_GE(y.at(i), 0.0);
    total += y.at(i);
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(Softmax, DisallowedColumnsAreExactlyZero) {
  const std::vector<std::uint8_t> allowed{1, 0, 1, 0};
  const auto y = ops::softmax(Tensor::from({1, 4}, {0.3, 9.0, -0.2, 4.0}), allowed);
  EXPECT_EQ(y.at(1), 0.0);
  EXPECT_EQ(y.at(3), 0.0);
  EXPECT_NEAR(y.at(0) + y.at(2), 1.0, 1e-12);
}

TEST(Softmax, EmptyAxisRejected) { EXPECT_THROW(ops::softmax(Tensor::zeros({2, 0})), std::invalid_argument); }

TEST(LayerNorm, ConstantVectorNormalizesToZero) {
  const auto y = ops::layer_norm(Tensor::full({1, 4}, 3.0), Tensor::full({4}, 1.0), Tensor::zeros({4}));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, AlreadyNormalizedPair) {
  const auto y = ops::layer_norm(Tensor::from({1, 2}, {1.0, -1.0}), Tensor::full({2}, 1.0), Tensor::zeros({2}));
  EXPECT_NEAR(y.at(0), 1.0, 1e-5);
  EXPECT_NEAR(y.at(1), -1.0, 1e-5);
}

TEST(LayerNorm, MomentsOfRandomVector) {
  std::mt19937_64 rng(5);
  const auto x = random_tensor({1, 16}, rng, -4, 4);
  const auto y = ops::layer_norm(x, Tensor::full({16}, 1.0), Tensor::zeros({16}));
  const auto xs = x.to_vector();
  const double mu = std::accumulate(xs.begin(), xs.end(), 0.0) / 16.0;
  double s2 = 0.0;
  for (double e : xs) s2 += (e - mu) * (e - mu);
  s2 /= 16.0;
  const auto v = y.to_vector();
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / 16.0;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= 16.0;
  EXPECT_LT(std::fabs(mean), 1e-9);
  // The epsilon inside the square root shrinks the variance slightly.
  EXPECT_NEAR(var, s2 / (s2 + ops::kLayerNormEps), 1e-12);
}

TEST(LayerNorm, NeedsTwoFeatures) {
  EXPECT_THROW(ops::layer_norm(Tensor::zeros({1, 1}), Tensor::zeros({1}), Tensor::zeros({1})), std::invalid_argument);
}

TEST(Elementwise, SigmoidAtZero) {
  auto x = Tensor::scalar(0.0, true);
  Tape tape;
  TapeScope scope(tape);
  const auto y = ops::sigmoid(x);
  EXPECT_DOUBLE_EQ(y.item(), 0.5);
  tape.backward(ops::sum(y));
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.25);
}

TEST(Losses, CrossEntropyOfUniformIsLog36) {
  for (std::size_t target : {0u, 17u, 35u}) {
    EXPECT_NEAR(ops::cross_entropy(Tensor::zeros({36}), target).item(), std::log(36.0), 1e-12);
  }
  EXPECT_NEAR(std::log(36.0), 3.5835, 1e-4);
}

TEST(Losses, CrossEntropyRejectsOutOfRangeTarget) {
  EXPECT_THROW(ops::cross_entropy(Tensor::zeros({36}), 36), std::invalid_argument);
}

TEST(Losses, L1) { EXPECT_DOUBLE_EQ(ops::l1_loss(Tensor::scalar(3.0), Tensor::scalar(7.0)).item(), 4.0); }

TEST(Dropout, IdentityInEvaluation) {
  std::mt19937_64 rng(6);
  const auto x = random_tensor({3, 3}, rng);
  const auto y = ops::dropout(x, 0.1, rng, false);
  EXPECT_EQ(y.to_vector(), x.to_vector());
}

TEST(Dropout, ScalesKeptUnitsInTraining) {
  std::mt19937_64 rng(7);
  const auto y = ops::dropout(Tensor::full({1, 1000}, 1.0), 0.5, rng, true);
  int kept = 0;
  for (double v : y.data()) {
    EXPECT_TRUE(v == 0.0 || v == 2.0);
    kept += v != 0.0;
  }
  EXPECT_GT(kept, 400);
  EXPECT_LT(kept, 600);
}

TEST(EmbeddingLookup, GathersRows) {
  const auto table = Tensor::from({3, 2}, {0, 1, 2, 3, 4, 5});
  const std::vector<std::size_t> idx{2, 0, 2};
  EXPECT_EQ(ops::embedding_lookup(table, idx).to_vector(), (std::vector<double>{4, 5, 0, 1, 4, 5}));
}

TEST(Backward, SumGivesOnes) {
  auto x = Tensor::from({3}, {1, 2, 3}, true);
  Tape tape;
  TapeScope scope(tape);
  tape.backward(ops::sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SquareGivesTwoX) {
  auto x = Tensor::from({2}, {1, 2}, true);
  Tape tape;
  TapeScope scope(tape);
  tape.backward(ops::sum(ops::mul(x, x)));
  EXPECT_EQ(x.grad()[0], 2.0);
  EXPECT_EQ(x.grad()[1], 4.0);
}

TEST(Backward, CompositeMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({4, 5}, rng);
  const auto loss = [&] { return ops::cross_entropy(ops::softmax(ops::matmul(a, b)), 2); };
  EXPECT_LE(max_grad_error(loss, {a, b}), 1e-4);
}

TEST(Backward, RejectsNonScalarLoss) {
  auto x = Tensor::from({2}, {1, 2}, true);
  Tape tape;
  TapeScope scope(tape);
  const auto y = ops::scale(x, 2.0);
  EXPECT_THROW(tape.backward(y), std::invalid_argument);
}

TEST(Backward, RejectsEmptyTape) {
  Tape tape;
  EXPECT_THROW(tape.backward(Tensor::scalar(1.0, true)), std::invalid_argument);
}

TEST(Backward, TapeIsTopologicallyOrdered) {
  std::mt19937_64 rng(9);
  auto x = random_tensor({2, 3}, rng);
  Tape tape;
  TapeScope scope(tape);
  const auto y = ops::relu(ops::matmul(x, ops::transpose(x)));
  const auto z = ops::sum(ops::add(y, y));
  (void)z;
  for (std::size_t i = 0; i < tape.size(); ++i) {
    for (const auto& p : tape.nodes()[i]->parents) {
      const long pos = tape.position_of(p.get());
      EXPECT_TRUE(pos < static_cast<long>(i)) << "parent recorded after child";
    }
  }
}

TEST(Backward, DeterministicGivenSameTape) {
  std::mt19937_64 rng(10);
  auto a = random_tensor({4, 4}, rng);
  std::vector<double> first;
  for (int rep = 0; rep < 2; ++rep) {
    a.zero_grad();
    Tape tape;
    TapeScope scope(tape);
    tape.backward(ops::sum(ops::softmax(ops::matmul(a, a))));
    const std::vector<double> g(a.grad().begin(), a.grad().end());
    if (rep == 0) first = g;
    else EXPECT_EQ(first, g);
  }
}

// Every differentiable op against central differences on 20+ random shapes.
class OpGradients : public ::testing::TestWithParam<int> {};

TEST_P(OpGradients, MatchCentralDifferences) {
  std::mt19937_64 rng(100 + static_cast<std::uint64_t>(GetParam()));
  std::uniform_int_distribution<std::size_t> ext(1, 4);
  const std::size_t m = ext(rng), k = ext(rng) + 1, n = ext(rng);
  auto a = random_tensor({m, k}, rng);
  auto b = random_tensor({k, n}, rng);
  auto c = random_tensor({m, k}, rng);
  auto bias = random_tensor({k}, rng);
  auto gain = random_tensor({k}, rng, 0.5, 1.5);
  auto pos = random_tensor({m, k}, rng, 0.2, 2.0);
  std::vector<double> w(m * k);
  for (auto& v : w) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  const auto weights = Tensor::from({m, k}, w);
  const auto weigh = [&](const Tensor& t) { return ops::sum(ops::mul(t, weights)); };
  const std::vector<std::size_t> rows{m - 1, 0};
  std::vector<std::uint8_t> allowed(k, 1);
  allowed[0] = 0;
  const double tol = 1e-4;

  EXPECT_LE(max_grad_error([&] { return ops::sum(ops::matmul(a, b)); }, {a, b}), tol) << "matmul";
  EXPECT_LE(max_grad_error([&] { return weigh(ops::transpose(ops::transpose(a))); }, {a}), tol) << "transpose";
  EXPECT_LE(max_grad_error([&] { return weigh(ops::add(a, c)); }, {a, c}), tol) << "add";
  EXPECT_LE(max_grad_error([&] { return weigh(ops::sub(a, c)); }, {a, c}), tol) << "sub";
  EXPECT_LE(max_grad_error([&] { return weigh(ops::mul(a, c)); }, {a, c}), tol) << "mul";
  EXPECT_LE(max_grad_error([&] { return weigh(ops::scale(a, -1.7)); }, {a}), tol) << "scale";
  EXPECT_LE(max_grad_error([&] { return weigh(ops::add_bias(a, bias)); }, {a, bias}), tol) << "add_bias";
  EXPECT_LE(max_grad_error([&] { return weigh(ops::sigmoid(a)); }, {a}), tol) << "sigmoid";
  EXPECT_LE(max_grad_error([&] { return weigh(ops::relu(a)); }, {a}), tol) << "relu";
  EXPECT_LE(max_grad_error([&] { return weigh(ops::log(pos)); }, {pos}), tol) << "log";
  EXPECT_LE(max_grad_error([&] { return weigh(ops::abs(a)); }, {a}), tol) << "abs";
  EXPECT_LE(max_grad_error([&] { return weigh(ops::softmax(a)); }, {a}), tol) << "softmax";
  if (k > 1) {
    EXPECT_LE(max_grad_error([&] { return weigh(ops::softmax(a, allowed)); }, {a}), tol) << "masked softmax";
  }
  EXPECT_LE(max_grad_error([&] { return weigh(ops::log_softmax(a)); }, {a}), tol) << "log_softmax";
  EXPECT_LE(max_grad_error([&] { return weigh(ops::layer_norm(a, gain, bias)); }, {a, gain, bias}), tol)
      << "layer_norm";
  EXPECT_LE(max_grad_error([&] { return ops::sum(ops::mul(ops::gather_rows(a, rows), ops::gather_rows(c, rows))); },
                           {a}),
            tol)
      << "gather_rows";
  // Scatter the first column to every other flat slot of a longer vector.
  std::vector<std::size_t> slots(m);
  for (std::size_t i = 0; i < m; ++i) slots[i] = 2 * i + 1;
  EXPECT_LE(max_grad_error([&] {
              const auto sa = ops::scatter(ops::reshape(ops::slice_cols(a, 0, 1), {m}), slots, 2 * m + 1);
              const auto sc = ops::scatter(ops::reshape(ops::slice_cols(c, 0, 1), {m}), slots, 2 * m + 1);
              return ops::sum(ops::mul(sa, sc));
            },
                           {a, c}),
            tol)
      << "scatter";
  EXPECT_LE(max_grad_error([&] { const std::vector<Tensor> p{a, c}; return weigh(ops::slice_cols(ops::concat_cols(p), 1, k)); },
                           {a, c}),
            tol)
      << "concat_cols/slice_cols";
  EXPECT_LE(max_grad_error([&] { const std::vector<Tensor> p{a, c}; return ops::sum(ops::mul(ops::concat_rows(p), ops::concat_rows(p))); },
                           {a, c}),
            tol)
      << "concat_rows";
  EXPECT_LE(max_grad_error([&] { return ops::cross_entropy(ops::reshape(a, {m * k}), 0); }, {a}), tol) << "cross_entropy";
  EXPECT_LE(max_grad_error([&] { return ops::nll(ops::reshape(pos, {m * k}), m * k - 1); }, {pos}), tol) << "nll";
  EXPECT_LE(max_grad_error([&] { return ops::l1_loss(a, c); }, {a, c}), tol) << "l1_loss";
  EXPECT_LE(max_grad_error([&] { return ops::softargmax(a, 3.0); }, {a}), tol) << "softargmax";
  EXPECT_LE(max_grad_error([&] { return ops::neg_entropy(a); }, {a}), tol) << "neg_entropy";
  EXPECT_LE(max_grad_error([&] { return ops::pick(ops::mul(a, c), 0); }, {a, c}), tol) << "pick";
}

INSTANTIATE_TEST_SUITE_P(RandomShapes, OpGradients, ::testing::Range(0, 24));

TEST(Softargmax, OneHotGivesItsIndex) {
  auto x = Tensor::zeros({10});
  x.mutable_data()[7] = 1.0;
  // exp(-beta) underflows against 1 once beta passes ~40, so the result is
  // exactly the index for any beta in the working range.
  for (double beta : {100.0, 1e3, 1e4, 1e6}) EXPECT_DOUBLE_EQ(ops::softargmax(x, beta).item(), 7.0);
}

TEST(Softargmax, UniformGivesMeanIndex) {
  EXPECT_DOUBLE_EQ(ops::softargmax(Tensor::full({4}, 0.25), 1e4).item(), 1.5);
}

TEST(Softargmax, LargeBetaRecoversArgmax) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    auto x = random_tensor({12}, rng, 0, 1);
    auto v = x.to_vector();
    const auto k = static_cast<double>(std::max_element(v.begin(), v.end()) - v.begin());
    EXPECT_LT(std::fabs(ops::softargmax(x, 1e4).item() - k), 1e-3);
  }
}
