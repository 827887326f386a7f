// Copyright (c) 2026 The yvec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "support/gradcheck.hpp"
#include "yvec/numerics/ops.hpp"
#include "yvec/numerics/optim.hpp"

namespace yvec {
namespace {

using testing::gradcheck;
using testing::random_tensor;
using TD = Tensor<double>;

TD vec(std::initializer_list<double> v) { return TD::vector(v); }

TEST(Conv1d, StrideTwoDotProducts) {
  Tape<double> tape;
  auto x = tape.constant(TD({1, 4}, {1, 2, 3, 4}));
  auto w = tape.constant(TD({1, 1, 2}, {1, 1}));
  auto b = tape.constant(vec({0}));
  auto y = ops::conv1d(x, w, b, 2);
  EXPECT_EQ(y.shape(), (Shape{1, 2}));
  EXPECT_EQ(y.value()[0], 3.0);
  EXPECT_EQ(y.value()[1], 7.0);
}

TEST(Conv1d, IdentityKernel) {
  Tape<double> tape;
  auto x = tape.constant(TD({1, 5}, {0.5, -1, 2, 3, 4}));
  auto y = ops::conv1d(x, tape.constant(TD({1, 1, 1}, {1})),
                       tape.constant(vec({0})), 1);
  EXPECT_EQ(y.value(), x.value());
}

TEST(Conv1d, TableOneFirstLayerLength) {
  Tape<float> tape;
  auto x = tape.constant(Tensor<float>({1, 62400}));
  auto y = ops::conv1d(x, tape.constant(Tensor<float>({1, 1, 12})),
                       tape.constant(Tensor<float>({1})), 6);
  EXPECT_EQ(y.dim(1), 10399u);
}

TEST(Conv1d, TooShortNamesLayer) {
  Tape<double> tape;
  auto x = tape.constant(TD({1, 3}));
  try {
    ops::conv1d(x, tape.constant(TD({1, 1, 4})), tape.constant(vec({0})), 1, 1,
                "branch2.filter");
    FAIL() << "expected InputTooShortError";
  } catch (const InputTooShortError& e) {
    EXPECT_NE(std::string(e.what()).find("branch2.filter"), std::string::npos);
  }
}

TEST(Conv1d, MatchesSlidingWindowOracleForAllSmallGeometries) {
  Rng rng(3);
  for (std::size_t len = 1; len <= 64; ++len) {
    for (std::size_t k = 1; k <= len; k += (len > 16 ? 5 : 1)) {
      for (std::size_t s = 1; s <= 8; ++s) {
        std::vector<double> in(len), ker(k);
        for (auto& v : in) v = uniform(rng, -1, 1);
        for (auto& v : ker) v = uniform(rng, -1, 1);
        // Oracle: enumerate every window start explicitly.
        std::vector<double> expect;
        for (std::size_t start = 0; start + k <= len; start += s) {
          double acc = 0.25;
          for (std::size_t j = 0; j < k; ++j) acc += ker[j] * in[start + j];
          expect.push_back(acc);
        }
        ASSERT_EQ(expect.size(), (len - k) / s + 1);
        Tape<double> tape;
        auto y = ops::conv1d(tape.constant(TD({1, len}, in)),
                             tape.constant(TD({1, 1, k}, ker)),
                             tape.constant(vec({0.25})), s);
        ASSERT_EQ(y.dim(1), expect.size());
        for (std::size_t i = 0; i < expect.size(); ++i) {
          ASSERT_NEAR(y.value()[i], expect[i], 1e-12);
        }
      }
    }
  }
}

TEST(MaxPool, WindowedMaximum) {
  Tape<double> tape;
  auto y = ops::maxpool1d(tape.constant(TD({1, 4}, {1, 3, 2, 5})), 2, 2);
  EXPECT_EQ(y.value(), TD({1, 2}, {3, 5}));
}

TEST(MaxPool, UnitWindowIsIdentityAndConstantStaysConstant) {
  Tape<double> tape;
  auto x = tape.constant(TD({2, 3}, {1, -2, 3, 4, 5, -6}));
  EXPECT_EQ(ops::maxpool1d(x, 1, 1).value(), x.value());
  auto c = ops::maxpool1d(tape.constant(TD({1, 9}, 2.5)), 3, 2);
  for (double v : c.value().values()) EXPECT_EQ(v, 2.5);
}

TEST(MaxPool, LengthMatchesEnumeration) {
  for (std::size_t len = 1; len <= 64; ++len) {
    for (std::size_t w = 1; w <= len; ++w) {
      for (std::size_t s = 1; s <= 8; ++s) {
        std::size_t count = 0;
        for (std::size_t start = 0; start + w <= len; start += s) ++count;
        Tape<double> tape;
        auto y = ops::maxpool1d(tape.constant(TD({1, len})), w, s);
        ASSERT_EQ(y.dim(1), count);
      }
    }
  }
}

TEST(MaxPool, TieRoutesGradientToFirstIndex) {
  Tape<double> tape;
  auto x = tape.variable(TD({1, 4}, {2, 2, 1, 1}));
  tape.backward(ops::sum(ops::maxpool1d(x, 2, 2)));
  EXPECT_EQ(tape.grad(x), TD({1, 4}, {1, 0, 1, 0}));
}

TEST(MaxPool, TooShort) {
  Tape<double> tape;
  EXPECT_THROW(ops::maxpool1d(tape.constant(TD({1, 2})), 3, 1), InputTooShortError);
}

TEST(AvgPool, Examples) {
  Tape<double> tape;
  EXPECT_EQ(ops::avgpool_time(tape.constant(TD::matrix({{1, 3}, {2, 2}}))).value(),
            TD({2, 1}, {2, 2}));
  auto single = tape.constant(TD({3, 1}, {1, 2, 3}));
  EXPECT_EQ(ops::avgpool_time(single).value(), single.value());
  EXPECT_EQ(ops::avgpool_time(tape.constant(TD({2, 4}))).value(), TD({2, 1}));
}

TEST(Elementwise, Examples) {
  Tape<double> tape;
  EXPECT_EQ(ops::relu(tape.constant(vec({-1, 0, 2}))).value(), vec({0, 0, 2}));
  EXPECT_DOUBLE_EQ(ops::leaky_relu(tape.constant(vec({-1})), 0.2).value()[0], -0.2);
  EXPECT_EQ(ops::sigmoid(tape.constant(vec({0}))).value()[0], 0.5);
}

TEST(Elementwise, SigmoidStaysInOpenUnitInterval) {
  Rng rng(5);
  Tape<double> tape;
  auto x = random_tensor(rng, {1000}, -30, 30);
  for (double v : ops::sigmoid(tape.constant(x)).value().values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  Tape<float> tf;
  auto y = ops::sigmoid(tf.constant(Tensor<float>::vector({-15.f, 15.f, 0.f})));
  for (float v : y.value().values()) {
    EXPECT_GT(v, 0.f);
    EXPECT_LT(v, 1.f);
  }
}

TEST(LayerNorm, Examples) {
  Tape<double> tape;
  auto one = tape.constant(TD({2}, 1.0));
  auto zero = tape.constant(TD({2}, 0.0));
  auto flat = ops::layer_norm_channels(tape.constant(TD({2, 1}, {2, 2})), one, zero);
  EXPECT_EQ(flat.value(), TD({2, 1}, {0, 0}));
  auto spread = ops::layer_norm_channels(tape.constant(TD({2, 1}, {1, 3})), one,
                                         zero, 1e-15);
  EXPECT_NEAR(spread.value()[0], -1.0, 1e-12);
  EXPECT_NEAR(spread.value()[1], 1.0, 1e-12);
  auto bias = tape.constant(vec({0.3, -0.7}));
  auto gated = ops::layer_norm_channels(tape.constant(TD({2, 1}, {1, 3})), zero, bias);
  EXPECT_EQ(gated.value(), TD({2, 1}, {0.3, -0.7}));
}

TEST(LayerNorm, FramesAreStandardized) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t f = 2 + uniform_index(rng, 40), t = 1 + uniform_index(rng, 20);
    auto x = random_tensor(rng, {f, t}, -5, 5);
    Tape<double> tape;
    auto y = ops::layer_norm_channels(tape.constant(x), tape.constant(TD({f}, 1.0)),
                                      tape.constant(TD({f}, 0.0)));
    for (std::size_t j = 0; j < t; ++j) {
      double mx = 0, vx = 0, my = 0, vy = 0;
      for (std::size_t i = 0; i < f; ++i) mx += x.at(i, j), my += y.value().at(i, j);
      mx /= f;
      my /= f;
      for (std::size_t i = 0; i < f; ++i) {
        vx += std::pow(x.at(i, j) - mx, 2);
        vy += std::pow(y.value().at(i, j) - my, 2);
      }
      if (vx / f <= 1e-3) continue;
      EXPECT_LT(std::abs(my), 1e-6);
      EXPECT_NEAR(vy / f, 1.0, 1e-4);
    }
  }
}

TEST(Linear, Examples) {
  Tape<double> tape;
  auto x = tape.constant(vec({3, 4}));
  EXPECT_EQ(ops::linear(x, tape.constant(TD::matrix({{1, 0}, {0, 1}})),
                        tape.constant(vec({0, 0}))).value(),
            vec({3, 4}));
  EXPECT_EQ(ops::linear(x, tape.constant(TD({2, 2})), tape.constant(vec({5, 6}))).value(),
            vec({5, 6}));
  EXPECT_EQ(ops::linear(x, tape.constant(TD::matrix({{1, 2}})), tape.constant(vec({1}))).value(),
            vec({12}));
  EXPECT_THROW(ops::linear(x, tape.constant(TD({2, 3})), tape.constant(vec({0, 0}))),
               ShapeError);
}

TEST(Dropout, IdentityCases) {
  Rng rng(1);
  Tape<double> tape;
  auto x = tape.constant(vec({1, 2, 3}));
  EXPECT_EQ(ops::dropout(x, 0.0, true, rng).value(), x.value());
  EXPECT_EQ(ops::dropout(x, 0.7, false, rng).value(), x.value());
  EXPECT_THROW(ops::dropout(x, 1.0, true, rng), ConfigError);
}

TEST(Dropout, MonteCarloExpectationMatchesInput) {
  Rng rng(42);
  const TD x = vec({0.5, -1.0, 2.0});
  std::vector<double> acc(3, 0.0);
  constexpr int kDraws = 10000;
  for (int d = 0; d < kDraws; ++d) {
    Tape<double> tape;
    auto y = ops::dropout(tape.constant(x), 0.5, true, rng);
    for (int i = 0; i < 3; ++i) acc[i] += y.value()[i];
  }
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(acc[i] / kDraws, x[i], 0.02 * std::abs(x[i]));
  }
}

TEST(Backward, SumGivesOnes) {
  Tape<double> tape;
  auto x = tape.variable(TD({2, 3}, 0.7));
  tape.backward(ops::sum(x));
  EXPECT_EQ(tape.grad(x), TD({2, 3}, 1.0));
}

TEST(Backward, SquareAndAccumulation) {
  Tape<double> tape;
  auto x = tape.variable(vec({1, 2}));
  auto loss = ops::sum(ops::mul(x, x));
  tape.backward(loss);
  EXPECT_EQ(tape.grad(x), vec({2, 4}));
  tape.backward(loss);
  EXPECT_EQ(tape.grad(x), vec({4, 8}));
}

TEST(Backward, NonScalarLossRejected) {
  Tape<double> tape;
  auto x = tape.variable(vec({1, 2}));
  EXPECT_THROW(tape.backward(ops::scale(x, 2.0)), ContractError);
}

TEST(Backward, ParameterGradientsAccumulate) {
  ParameterSet<double> params;
  auto& p = params.add("w", vec({1, -1}));
  for (int i = 0; i < 2; ++i) {
    Tape<double> tape;
    tape.backward(ops::sum_squares(tape.param(p)));
  }
  EXPECT_EQ(p.grad, vec({4, -4}));
  GradBuffer<double> sink(params);
  Tape<double> tape;
  tape.backward(ops::sum_squares(tape.param(p)), &sink);
  EXPECT_EQ(sink[0], vec({2, -2}));
  EXPECT_EQ(p.grad, vec({4, -4}));
}

// Finite-difference agreement, 20 random shapes per op.
class GradientSuite : public ::testing::Test {
 protected:
  void expect_ok(const testing::GradCheckResult& r) {
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  }
  Rng rng{2024};
  std::size_t pick(std::size_t lo, std::size_t hi) {
    return lo + uniform_index(rng, hi - lo + 1);
  }
};

TEST_F(GradientSuite, Conv1d) {
  for (int i = 0; i < 20; ++i) {
    const std::size_t cin = pick(1, 3), cout = pick(1, 3), k = pick(1, 4),
                      s = pick(1, 3), d = pick(1, 2);
    const std::size_t len = (k - 1) * d + 1 + pick(0, 8);
    expect_ok(gradcheck({random_tensor(rng, {cin, len}), random_tensor(rng, {cout, cin, k}),
                         random_tensor(rng, {cout})},
                        [s, d](Tape<double>&, const std::vector<Var<double>>& v) {
                          return ops::conv1d(v[0], v[1], v[2], s, d);
                        },
                        i));
  }
}

TEST_F(GradientSuite, MaxPool) {
  for (int i = 0; i < 20; ++i) {
    const std::size_t c = pick(1, 3), w = pick(1, 4), s = pick(1, 4);
    const std::size_t len = w + pick(0, 10);
    // Distinct values spaced well beyond h so no window holds a near-tie.
    std::vector<double> vals(c * len);
    for (std::size_t j = 0; j < vals.size(); ++j) vals[j] = -1.0 + 2.0 * j / vals.size();
    for (std::size_t j = vals.size(); j > 1; --j) std::swap(vals[j - 1], vals[uniform_index(rng, j)]);
    expect_ok(gradcheck({TD({c, len}, vals)},
                        [w, s](Tape<double>&, const std::vector<Var<double>>& v) {
                          return ops::maxpool1d(v[0], w, s);
                        },
                        i));
  }
}

TEST_F(GradientSuite, AvgPool) {
  for (int i = 0; i < 20; ++i) {
    expect_ok(gradcheck({random_tensor(rng, {pick(1, 5), pick(1, 9)})},
                        [](Tape<double>&, const std::vector<Var<double>>& v) {
                          return ops::avgpool_time(v[0]);
                        },
                        i));
  }
}

TEST_F(GradientSuite, Activations) {
  for (int i = 0; i < 20; ++i) {
    const Shape shape{pick(1, 4), pick(1, 6)};
    auto x = testing::random_tensor_off_zero(rng, shape);
    expect_ok(gradcheck({x}, [](Tape<double>&, const std::vector<Var<double>>& v) {
      return ops::relu(v[0]);
    }, i));
    expect_ok(gradcheck({x}, [](Tape<double>&, const std::vector<Var<double>>& v) {
      return ops::leaky_relu(v[0], 0.2);
    }, i));
    expect_ok(gradcheck({random_tensor(rng, shape, -4, 4)},
                        [](Tape<double>&, const std::vector<Var<double>>& v) {
                          return ops::sigmoid(v[0]);
                        },
                        i));
  }
}

TEST_F(GradientSuite, LayerNorm) {
  for (int i = 0; i < 20; ++i) {
    const std::size_t f = pick(2, 6), t = pick(1, 5);
    expect_ok(gradcheck({random_tensor(rng, {f, t}), random_tensor(rng, {f}),
                         random_tensor(rng, {f})},
                        [](Tape<double>&, const std::vector<Var<double>>& v) {
                          return ops::layer_norm_channels(v[0], v[1], v[2]);
                        },
                        i));
  }
}

TEST_F(GradientSuite, Linear) {
  for (int i = 0; i < 20; ++i) {
    const std::size_t din = pick(1, 6), dout = pick(1, 6);
    expect_ok(gradcheck({random_tensor(rng, {din}), random_tensor(rng, {dout, din}),
                         random_tensor(rng, {dout})},
                        [](Tape<double>&, const std::vector<Var<double>>& v) {
                          return ops::linear(v[0], v[1], v[2]);
                        },
                        i));
  }
}

TEST_F(GradientSuite, GatesConcatTruncateStatPool) {
  for (int i = 0; i < 20; ++i) {
    const std::size_t f = pick(1, 4), t = pick(2, 6);
    expect_ok(gradcheck({random_tensor(rng, {f, t}), random_tensor(rng, {f, 1})},
                        [](Tape<double>&, const std::vector<Var<double>>& v) {
                          return ops::scale_rows(v[0], v[1]);
                        },
                        i));
    expect_ok(gradcheck({random_tensor(rng, {f, t}), random_tensor(rng, {1, t})},
                        [](Tape<double>&, const std::vector<Var<double>>& v) {
                          return ops::scale_cols(v[0], v[1]);
                        },
                        i));
    expect_ok(gradcheck({random_tensor(rng, {f, t}), random_tensor(rng, {pick(1, 3), t})},
                        [t](Tape<double>&, const std::vector<Var<double>>& v) {
                          return ops::truncate_time(ops::concat_channels<double>({v[0], v[1]}), t - 1);
                        },
                        i));
    expect_ok(gradcheck({random_tensor(rng, {f, t})},
                        [](Tape<double>&, const std::vector<Var<double>>& v) {
                          return ops::stat_pool(v[0]);
                        },
                        i));
  }
}

TEST(Sgd, Examples) {
  std::vector<double> p{1.0, -2.0}, v{0.0, 0.0};
  const std::vector<double> g{3.0, 5.0};
  sgd_momentum_step<double>(p, g, v, 0.01, 0.9);
  EXPECT_DOUBLE_EQ(p[0], 1.0 - 0.03);
  EXPECT_DOUBLE_EQ(p[1], -2.0 - 0.05);

  std::vector<double> q{1.0}, vq{0.0};
  const std::vector<double> zero{0.0};
  sgd_momentum_step<double>(q, zero, vq, 0.01, 0.9);
  EXPECT_EQ(q[0], 1.0);

  std::vector<double> r{0.0}, vr{0.0};
  const std::vector<double> gr{2.0};
  sgd_momentum_step<double>(r, gr, vr, 0.01, 0.9);
  sgd_momentum_step<double>(r, gr, vr, 0.01, 0.9);
  EXPECT_NEAR(r[0], -0.01 * (2.0 + 1.9 * 2.0), 1e-15);
}

TEST(Sgd, ZeroLearningRateLeavesParametersUntouched) {
  ParameterSet<float> params;
  params.add("a", Tensor<float>::vector({0.1f, 0.2f}));
  params.zero_grad();
  params[0].grad = Tensor<float>::vector({5.f, -5.f});
  SgdMomentum<float> opt(params);
  const auto before = params[0].value;
  opt.step(params, 0.f, 0.9f);
  EXPECT_EQ(params[0].value, before);
}

}  // namespace
}  // namespace yvec
