#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "fedcbmir/numerics/ops.hpp"
#include "fedcbmir/numerics/optimizer.hpp"
#include "fedcbmir/numerics/tape.hpp"
#include "oracles.hpp"

using namespace fedcbmir;

namespace {

template <class T>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(d(rng));
  return t;
}

std::vector<double> as_vec(const Tensor<double>& t) { return t.storage(); }

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST(Conv2d, IdentityKernel) {
  Tensor<double> x({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor<double> k({1, 1, 1, 1}, {1.0});
  Tensor<double> b({1}, {0.0});
  EXPECT_EQ(conv2d(x, k, b, 1, 0), x);
}

TEST(Conv2d, SumOfOnes) {
  auto x = Tensor<double>::filled({1, 3, 3}, 1.0);
  auto k = Tensor<double>::filled({1, 1, 3, 3}, 1.0);
  auto b = Tensor<double>::filled({1}, 0.0);
  auto y = conv2d(x, k, b, 1, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1}));
  EXPECT_EQ(y[0], 9.0);
}

TEST(Conv2d, MatchesNaiveLoopOnRandom3x8x8) {
  std::mt19937_64 rng(7);
  auto x = random_tensor<double>({3, 8, 8}, rng);
  auto k = random_tensor<double>({4, 3, 3, 3}, rng);
  auto b = random_tensor<double>({4}, rng);
  auto y = conv2d(x, k, b, 1, 1);
  int ho = 0, wo = 0;
  auto ref = oracle::conv2d(as_vec(x), 3, 8, 8, as_vec(k), 4, 3, 3, as_vec(b), 1, 1, ho, wo);
  ASSERT_EQ(y.size(), ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_LE(oracle::rel_err(y[i], ref[i]), 1e-6);
}

TEST(Conv2d, ExhaustiveSmallShapesMatchNaiveLoop) {
  std::mt19937_64 rng(11);
  std::size_t cases = 0;
  for (int cin = 1; cin <= 4; ++cin)
    for (int cout : {1, 2, 4})
      for (int h = 1; h <= 8; ++h)
        for (int w = 1; w <= 8; ++w)
          for (int k = 1; k <= 3; ++k)
            for (int stride = 1; stride <= 2; ++stride)
              for (int pad = 0; pad <= 1; ++pad) {
                if (k > h + 2 * pad || k > w + 2 * pad) continue;
                auto x = random_tensor<double>({std::size_t(cin), std::size_t(h), std::size_t(w)}, rng);
                auto kk = random_tensor<double>(
                    {std::size_t(cout), std::size_t(cin), std::size_t(k), std::size_t(k)}, rng);
                auto b = random_tensor<double>({std::size_t(cout)}, rng);
                auto y = conv2d(x, kk, b, stride, pad);
                int ho = 0, wo = 0;
                auto ref = oracle::conv2d(as_vec(x), cin, h, w, as_vec(kk), cout, k, k, as_vec(b),
                                          stride, pad, ho, wo);
                ASSERT_EQ(y.shape(), (Shape{std::size_t(cout), std::size_t(ho), std::size_t(wo)}));
                for (std::size_t i = 0; i < ref.size(); ++i) {
                  ASSERT_NEAR(y[i], ref[i], 1e-12 * (1 + std::abs(ref[i])));
                }
                ++cases;
              }
  EXPECT_GT(cases, 8000u);
}

TEST(Conv2d, ShapeErrors) {
  Tensor<double> x({2, 4, 4});
  Tensor<double> b({1});
  EXPECT_THROW(conv2d(x, Tensor<double>({1, 3, 3, 3}), b, 1, 0), DimensionError);
  EXPECT_THROW(conv2d(x, Tensor<double>({1, 2, 5, 5}), b, 1, 0), DimensionError);
  EXPECT_THROW(conv2d(x, Tensor<double>({1, 2, 3, 3}), Tensor<double>({2}), 1, 0),
               DimensionError);
  EXPECT_THROW(conv2d(x, Tensor<double>({1, 2, 3, 3}), b, 0, 0), ContractError);
  try {
    conv2d(x, Tensor<double>({1, 3, 3, 3}), b, 1, 0);
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("axis 1"), std::string::npos);
  }
}

TEST(TransposeConv2d, UnitKernelIsIdentity) {
  std::mt19937_64 rng(3);
  auto x = random_tensor<double>({1, 5, 4}, rng);
  auto k = Tensor<double>::filled({1, 1, 1, 1}, 1.0);
  EXPECT_EQ(transpose_conv2d(x, k, Tensor<double>({1}), 1, 0), x);
}

TEST(TransposeConv2d, OutputSizeFormula) {
  auto x = Tensor<double>::filled({1, 2, 2}, 1.0);
  auto k = Tensor<double>::filled({1, 1, 2, 2}, 1.0);
  auto y = transpose_conv2d(x, k, Tensor<double>({1}), 2, 0);
  EXPECT_EQ(y.shape(), (Shape{1, 4, 4}));
  for (auto v : y.data()) EXPECT_EQ(v, 1.0);
}

TEST(TransposeConv2d, AdjointOfConv) {
  std::mt19937_64 rng(5);
  struct Geo { std::size_t cin, cout, h, w, k, s, p; };
  for (Geo g : {Geo{3, 4, 8, 8, 3, 1, 1}, Geo{3, 5, 8, 8, 3, 2, 1}, Geo{2, 3, 8, 6, 4, 2, 1},
                Geo{1, 2, 7, 7, 3, 2, 0}}) {
    auto x = random_tensor<double>({g.cin, g.h, g.w}, rng);
    auto k = random_tensor<double>({g.cout, g.cin, g.k, g.k}, rng);
    Tensor<double> zc({g.cout}), zt({g.cin});
    auto cx = conv2d(x, k, zc, g.s, g.p);
    auto y = random_tensor<double>(cx.shape(), rng);
    auto ty = transpose_conv2d(y, k, zt, g.s, g.p);
    if (ty.shape() != x.shape()) continue;  // non-invertible geometry, no adjoint pairing
    EXPECT_LE(oracle::rel_err(dot(cx, y), dot(x, ty)), 1e-6);
  }
}

TEST(Mse, TrivialValues) {
  Tensor<double> a({2}, {0.0, 1.0});
  Tensor<double> b({2}, {1.0, 0.0});
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_EQ(mse(a, b), 1.0);
  EXPECT_THROW(mse(a, Tensor<double>({3})), DimensionError);
}

TEST(Mse, MatchesScalarLoop) {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    auto a = random_tensor<double>({3, 5, 7}, rng);
    auto b = random_tensor<double>({3, 5, 7}, rng);
    const double got = mse(a, b);
    EXPECT_GE(got, 0.0);
    EXPECT_LE(oracle::rel_err(got, oracle::mse(a.storage(), b.storage())), 1e-10);
    EXPECT_EQ(mse(a, a), 0.0);
  }
}

TEST(Backward, QuadraticDerivative) {
  Tape<double> t;
  auto x = t.leaf(Tensor<double>({1}, {3.0}), true);
  auto zero = t.leaf(Tensor<double>({1}, {0.0}));
  auto loss = t.mse(x, zero);
  auto g = t.backward(loss);
  ASSERT_TRUE(g.of(x).has_value());
  EXPECT_EQ((*g.of(x))[0], 6.0);
  EXPECT_FALSE(g.of(zero).has_value());
}

TEST(Backward, NonScalarRootIsContractError) {
  Tape<double> t;
  auto x = t.leaf(Tensor<double>({2}, {1.0, 2.0}), true);
  auto y = t.relu(x);
  EXPECT_THROW(t.backward(y), ContractError);
}

namespace {

// Checks every trainable leaf of a one-op graph against central differences.
void check_op_gradient(std::function<Tape<double>::Id(Tape<double>&, std::vector<Tape<double>::Id>&)> op,
                       std::vector<Tensor<double>> inputs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto build = [&](const std::vector<Tensor<double>>& ins, Tape<double>& t,
                   std::vector<Tape<double>::Id>& ids) {
    ids.clear();
    for (const auto& in : ins) ids.push_back(t.leaf(in, true));
    auto out = op(t, ids);
    // Fixed random target so the loss is not symmetric in the output.
    std::mt19937_64 trng(seed * 31 + 1);
    auto target = random_tensor<double>(t.value(out).shape(), trng);
    return t.mse(out, t.leaf(target));
  };
  Tape<double> t;
  std::vector<Tape<double>::Id> ids;
  auto loss = build(inputs, t, ids);
  auto grads = t.backward(loss);
  const double h = 1e-4;
  for (std::size_t a = 0; a < inputs.size(); ++a) {
    ASSERT_TRUE(grads.of(ids[a]).has_value());
    const auto& ga = *grads.of(ids[a]);
    for (std::size_t i = 0; i < inputs[a].size(); ++i) {
      auto plus = inputs, minus = inputs;
      plus[a][i] += h;
      minus[a][i] -= h;
      Tape<double> tp, tm;
      std::vector<Tape<double>::Id> ip, im;
      const double lp = tp.value(build(plus, tp, ip))[0];
      const double lm = tm.value(build(minus, tm, im))[0];
      const double fd = (lp - lm) / (2 * h);
      EXPECT_NEAR(ga[i], fd, 1e-4 * std::max(1.0, std::abs(fd))) << "input " << a << " index " << i;
    }
  }
}

}  // namespace

TEST(Backward, EveryOperatorMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  using Ids = std::vector<Tape<double>::Id>;
  check_op_gradient([](Tape<double>& t, Ids& i) { return t.conv2d(i[0], i[1], i[2], 2, 1); },
                    {random_tensor<double>({2, 6, 6}, rng), random_tensor<double>({3, 2, 3, 3}, rng),
                     random_tensor<double>({3}, rng)},
                    1);
  check_op_gradient(
      [](Tape<double>& t, Ids& i) { return t.transpose_conv2d(i[0], i[1], i[2], 2, 1); },
      {random_tensor<double>({3, 3, 3}, rng), random_tensor<double>({3, 2, 4, 4}, rng),
       random_tensor<double>({2}, rng)},
      2);
  check_op_gradient([](Tape<double>& t, Ids& i) { return t.dense(i[0], i[1], i[2]); },
                    {random_tensor<double>({2, 2, 2}, rng), random_tensor<double>({5, 8}, rng),
                     random_tensor<double>({5}, rng)},
                    3);
  // Inputs kept away from 0 so the kink is never straddled.
  auto away = random_tensor<double>({10}, rng, 0.1, 1.0);
  for (std::size_t i = 0; i < away.size(); i += 2) away[i] = -away[i];
  check_op_gradient([](Tape<double>& t, Ids& i) { return t.relu(i[0]); }, {away}, 4);
  check_op_gradient([](Tape<double>& t, Ids& i) { return t.sigmoid(i[0]); },
                    {random_tensor<double>({10}, rng, -3, 3)}, 5);
  check_op_gradient([](Tape<double>& t, Ids& i) { return t.add(i[0], i[1]); },
                    {random_tensor<double>({4}, rng), random_tensor<double>({4}, rng)}, 6);
  check_op_gradient([](Tape<double>& t, Ids& i) { return t.reshape(i[0], {6}); },
                    {random_tensor<double>({2, 3}, rng)}, 7);
}

TEST(Ops, Deterministic) {
  std::mt19937_64 rng(1);
  auto x = random_tensor<float>({3, 16, 16}, rng);
  auto k = random_tensor<float>({8, 3, 3, 3}, rng);
  auto b = random_tensor<float>({8}, rng);
  EXPECT_EQ(conv2d(x, k, b, 2, 1), conv2d(x, k, b, 2, 1));
  auto tk = random_tensor<float>({3, 4, 4, 4}, rng);
  EXPECT_EQ(transpose_conv2d(x, tk, Tensor<float>({4}), 2, 1),
            transpose_conv2d(x, tk, Tensor<float>({4}), 2, 1));
}

TEST(Optimizer, SgdStep) {
  auto st = OptimizerState<double>::sgd(0.1);
  std::vector<double> w{1.0};
  std::vector<double> g{10.0};
  optimizer_step<double>(st, w, g);
  EXPECT_NEAR(w[0], 0.0, 1e-15);
  EXPECT_EQ(st.step, 1u);
  EXPECT_TRUE(st.m.empty());
}

TEST(Optimizer, ZeroGradientLeavesWeights) {
  for (auto st : {OptimizerState<double>::sgd(0.5), OptimizerState<double>::adam_with(0.5)}) {
    std::vector<double> w{1.5, -2.0, 3.25};
    const auto before = w;
    std::vector<double> g(3, 0.0);
    for (int i = 0; i < 3; ++i) optimizer_step<double>(st, w, g);
    EXPECT_EQ(w, before);
  }
}

TEST(Optimizer, AdamMatchesHandSteppedTrace) {
  // f(w) = (w - 3)^2, lr 0.1. Reference written out step by step.
  auto st = OptimizerState<double>::adam_with(0.1);
  std::vector<double> w{0.0};
  double rw = 0.0, m = 0.0, v = 0.0, b1t = 1.0, b2t = 1.0;
  for (int step = 1; step <= 25; ++step) {
    std::vector<double> g{2.0 * (w[0] - 3.0)};
    optimizer_step<double>(st, w, g);

    const double rg = 2.0 * (rw - 3.0);
    m = 0.9 * m + 0.1 * rg;
    v = 0.999 * v + 0.001 * rg * rg;
    b1t *= 0.9;
    b2t *= 0.999;
    rw = rw - 0.1 * (m / (1.0 - b1t)) / (std::sqrt(v / (1.0 - b2t)) + 1e-8);
    ASSERT_NEAR(w[0], rw, 1e-10) << "step " << step;
  }
  EXPECT_EQ(st.step, 25u);
  EXPECT_EQ(st.m.size(), 1u);
}

TEST(Optimizer, NonFiniteGradientNamesLayer) {
  Layout layout;
  layout.add("enc0.weight", {2});
  layout.add("enc0.bias", {1});
  auto st = OptimizerState<float>::adam_with(1e-3f);
  std::vector<float> w{1, 2, 3};
  std::vector<float> g{0, 0, std::nanf("")};
  try {
    optimizer_step<float>(st, w, g, &layout);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("enc0.bias"), std::string::npos);
  }
  EXPECT_EQ(w, (std::vector<float>{1, 2, 3}));
  EXPECT_THROW(optimizer_step<float>(st, w, std::vector<float>{1.0f}), DimensionError);
}
