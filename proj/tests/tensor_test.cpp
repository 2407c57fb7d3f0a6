#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "op_cases.hpp"
#include "tslab/errors.hpp"
#include "tslab/grad_check.hpp"
#include "tslab/ops.hpp"
#include "tslab/rng.hpp"

namespace tslab {
namespace {

std::vector<float> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

TEST(Matmul, IdentityZeroAndHandComputed) {
  const Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(values(matmul(a, Tensor::from({2, 2}, {1, 0, 0, 1}))), (std::vector<float>{1, 2, 3, 4}));
  EXPECT_EQ(values(matmul(a, Tensor::zeros({2, 2}))), (std::vector<float>{0, 0, 0, 0}));
  const Tensor c = matmul(a, Tensor::from({2, 1}, {5, 6}));
  EXPECT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_EQ(values(c), (std::vector<float>{17, 39}));
}

TEST(Matmul, TransposedOperandMatchesExplicitTranspose) {
  Rng rng(3);
  const Tensor a = random_tensor({3, 5}, rng);
  const Tensor b = random_tensor({4, 5}, rng);
  const Tensor bt = permute(b, {1, 0});
  const auto x = values(matmul(a, b, true));
  const auto y = values(matmul(a, bt));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x[i], y[i], 1e-5);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 2}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos);
    EXPECT_NE(msg.find("[2, 2]"), std::string::npos);
  }
}

TEST(Softmax, ClosedFormCases) {
  auto y = values(softmax(Tensor::from({2}, {0, 0})));
  EXPECT_FLOAT_EQ(y[0], 0.5f);
  EXPECT_FLOAT_EQ(y[1], 0.5f);
  y = values(softmax(Tensor::from({2}, {1000, 1000})));
  EXPECT_FLOAT_EQ(y[0], 0.5f);
  EXPECT_FLOAT_EQ(y[1], 0.5f);
  y = values(softmax(Tensor::from({2}, {0, static_cast<float>(std::log(3.0))})));
  EXPECT_NEAR(y[0], 0.25, 1e-6);
  EXPECT_NEAR(y[1], 0.75, 1e-6);
}

TEST(Softmax, RowsSumToOneAndArePositive) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_tensor({4, 33}, rng, 10.0);
    const Tensor y = softmax(x);
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 33; ++c) {
        const float p = y.at({r, c});
        EXPECT_GT(p, 0.0f);
        total += p;
      }
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
  }
}

TEST(RmsNorm, ClosedFormCases) {
  const Tensor ones4 = Tensor::full({4}, 1.0f);
  auto y = values(rms_norm(Tensor::from({4}, {1, 1, 1, 1}), ones4, 1e-12f));
  for (float v : y) EXPECT_NEAR(v, 1.0f, 1e-6);
  y = values(rms_norm(Tensor::from({2}, {0, 0}), Tensor::full({2}, 1.0f), 1e-6f));
  EXPECT_EQ(y, (std::vector<float>{0, 0}));
  y = values(rms_norm(Tensor::from({2}, {3, 4}), Tensor::full({2}, 1.0f), 1e-12f));
  EXPECT_NEAR(y[0], 3.0 / std::sqrt(12.5), 1e-6);
  EXPECT_NEAR(y[1], 4.0 / std::sqrt(12.5), 1e-6);
  EXPECT_NEAR(y[0], 0.8485, 1e-4);
  EXPECT_NEAR(y[1], 1.1314, 1e-4);
}

TEST(Gelu, MatchesTanhApproximationInDouble) {
  const std::vector<float> xs{-3.0f, -1.0f, -0.1f, 0.0f, 0.5f, 2.0f};
  const auto y = values(gelu(Tensor::from({xs.size()}, xs)));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double x = xs[i];
    const double ref = 0.5 * x * (1.0 + std::tanh(0.7978845608 * (x + 0.044715 * x * x * x)));
    EXPECT_NEAR(y[i], ref, 1e-6);
  }
}

TEST(Backward, SumGivesOnes) {
  Tensor x = Tensor::from({2, 3}, {1, -2, 3, 4, 5, -6}, true);
  sum(x).backward();
  for (float g : x.grad()) EXPECT_EQ(g, 1.0f);
}

TEST(Backward, SquareAndProductMatchFiniteDifferenceValues) {
  // Expected values frozen from central differences with h = 1e-3 in double:
  // d/dx x^2 at 3 -> 6, d/da (a*b) -> b = 5, d/db -> a = 2.
  Tensor x = Tensor::from({1}, {3}, true);
  sum(mul(x, x)).backward();
  EXPECT_NEAR(x.grad()[0], 6.0f, 1e-6);

  Tensor a = Tensor::from({1}, {2}, true);
  Tensor b = Tensor::from({1}, {5}, true);
  sum(mul(a, b)).backward();
  EXPECT_NEAR(a.grad()[0], 5.0f, 1e-6);
  EXPECT_NEAR(b.grad()[0], 2.0f, 1e-6);
}

TEST(Backward, NonScalarLossIsContractError) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  EXPECT_THROW(scale(x, 2.0f).backward(), ContractError);
}

TEST(Backward, SharedTensorAccumulatesBothUses) {
  Rng rng(5);
  const Tensor base = random_tensor({3, 4}, rng);
  const Tensor w1 = random_tensor({4, 2}, rng);
  const Tensor w2 = random_tensor({4, 2}, rng);

  Tensor x = base.clone();
  x.set_requires_grad(true);
  sum(add(matmul(x, w1), relu(matmul(x, w2)))).backward();

  Tensor x1 = base.clone();
  x1.set_requires_grad(true);
  sum(matmul(x1, w1)).backward();
  Tensor x2 = base.clone();
  x2.set_requires_grad(true);
  sum(relu(matmul(x2, w2))).backward();

  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(x.grad()[i], x1.grad()[i] + x2.grad()[i], 1e-6);
}

TEST(Backward, NoGradGuardRecordsNothing) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  NoGradGuard guard;
  const Tensor y = sum(mul(x, x));
  EXPECT_FALSE(y.requires_grad());
}

TEST(GradCheck, SumIsExact) {
  // Dyadic inputs and step keep every float32 evaluation exact, so the
  // finite difference is exactly 1.
  const Tensor x = Tensor::from({7}, {0.25f, -1.5f, 3.0f, 0.125f, -2.0f, 1.0f, 0.5f});
  const auto report = grad_check([](const Tensor& t) { return sum(t); }, x, 0x1.0p-10, 0.0);
  EXPECT_TRUE(report.passed) << report.summary();
  EXPECT_EQ(report.max_rel_error, 0.0);

  Rng rng(1);
  const auto random = grad_check([](const Tensor& t) { return sum(t); }, random_tensor({7}, rng), 1e-3, 1e-3);
  EXPECT_TRUE(random.passed) << random.summary();
}

TEST(GradCheck, SoftmaxDotOneHot) {
  Rng rng(2);
  const Tensor onehot = Tensor::from({8}, {0, 0, 1, 0, 0, 0, 0, 0});
  const auto report =
      grad_check([&](const Tensor& x) { return sum(mul(softmax(x), onehot)); }, random_tensor({8}, rng), 1e-3, 1e-4);
  EXPECT_TRUE(report.passed) << report.summary();
}

TEST(GradCheck, SkipsStencilsThatCrossReluKinks) {
  const Tensor x = Tensor::from({3}, {0.0004f, 1.0f, -0.7f});
  const auto report = grad_check([](const Tensor& t) { return sum(relu(t)); }, x, 1e-3, 1e-6);
  EXPECT_EQ(report.coordinates, 3u);
  EXPECT_EQ(report.kink_crossings, 1u);
  EXPECT_TRUE(report.passed) << report.summary();
}

TEST(GradCheck, ReportsNanCoordinate) {
  // Only the second coordinate feeds the NaN-producing branch.
  const Tensor x = Tensor::from({3}, {1.0f, 2.0f, 3.0f});
  const Tensor poison = Tensor::from({3}, {0.0f, std::nanf(""), 0.0f});
  const auto report = grad_check(
      [&](const Tensor& t) { return slice(mul(t, poison), 0, 1, 2); }, x, 1e-3, 1e-3);
  EXPECT_FALSE(report.passed);
  ASSERT_TRUE(report.nan_index.has_value());
  EXPECT_EQ(*report.nan_index, 0u);
}

TEST(GradCheck, EveryDifferentiableOpFiveRandomInputs) {
  for (const auto& c : op_cases()) {
    for (std::uint64_t trial = 0; trial < 5; ++trial) {
      Rng rng(1000 + trial);
      // Keep relu/abs-like kinks away from the finite-difference stencil.
      Tensor x = random_tensor(c.shape, rng);
      for (float& v : x.data()) {
        if (std::abs(v) < 0.05f) v = v < 0 ? -0.05f : 0.05f;
      }
      const auto report = grad_check([&](const Tensor& t) { return c.make(t, rng); }, x, 1e-3, 1e-3);
      EXPECT_TRUE(report.passed) << c.name << " trial " << trial << ": " << report.summary();
    }
  }
}

TEST(Determinism, RepeatedOpsAreBitIdentical) {
  Rng r1(9);
  const Tensor a = random_tensor({16, 32}, r1);
  const Tensor b = random_tensor({32, 8}, r1);
  const auto y1 = values(softmax(matmul(gelu(a), b)));
  const auto y2 = values(softmax(matmul(gelu(a), b)));
  EXPECT_EQ(y1, y2);
}

}  // namespace
}  // namespace tslab
