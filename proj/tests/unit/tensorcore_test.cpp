// Copyright 2026 The mrgan Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mrgan/nn.hpp"
#include "mrgan/ops.hpp"
#include "primitive_cases.hpp"

using namespace mrgan;

using mrgan::testing::random_tensor;
using mrgan::testing::weighted_sum;

TEST(Affine, IdentityWeights) {
  Var x = Var::constant(Tensor::matrix(1, 2, {1, 2}));
  Var w = Var::constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  Var b = Var::constant(Tensor::matrix(1, 2, {0, 0}));
  EXPECT_EQ(affine(x, w, b).value(), Tensor::matrix(1, 2, {1, 2}));
}

TEST(Affine, HandEvaluated) {
  Var x = Var::constant(Tensor::matrix(1, 2, {1, 2}));
  Var w = Var::constant(Tensor::matrix(2, 2, {1, 1, 1, 1}));
  Var b = Var::constant(Tensor::matrix(1, 2, {1, 1}));
  EXPECT_EQ(affine(x, w, b).value(), Tensor::matrix(1, 2, {4, 4}));
}

TEST(Affine, ShapeMismatchNamesBothShapes) {
  Var x = Var::constant(Tensor({3, 2}));
  Var w = Var::constant(Tensor({4, 5}));
  Var b = Var::constant(Tensor({1, 5}));
  try {
    affine(x, w, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[3x2]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x5]"), std::string::npos) << msg;
  }
}

TEST(Activation, Values) {
  Var x = Var::constant(Tensor::matrix(1, 2, {-1, 2}));
  Tensor y = activation(x, Activation::leaky(0.2)).value();
  EXPECT_DOUBLE_EQ(y[0], -0.2);
  EXPECT_DOUBLE_EQ(y[1], 2.0);
  EXPECT_EQ(activation(Var::constant(Tensor::scalar(0.0)), Activation::tanh()).item(), 0.0);
  EXPECT_EQ(activation(x, Activation::identity()).value(), x.value());
  EXPECT_THROW(activation(x, Activation::leaky(1.5)), std::invalid_argument);
}

TEST(Pool, MaxMinAndSingleRow) {
  Var x = Var::constant(Tensor::matrix(2, 2, {1, 5, 3, 2}));
  EXPECT_EQ(pool(x, PoolMode::kMax).value(), Tensor::matrix(1, 2, {3, 5}));
  EXPECT_EQ(pool(x, PoolMode::kMin).value(), Tensor::matrix(1, 2, {1, 2}));
  Var one = Var::constant(Tensor::matrix(1, 3, {4, -1, 7}));
  EXPECT_EQ(pool(one, PoolMode::kMax).value(), one.value());
  EXPECT_THROW(pool(Var::constant(Tensor({0, 3})), PoolMode::kMax), DimensionError);
}

TEST(Pool, TieRoutesGradientToFirstIndex) {
  Var x = Var::leaf(Tensor::matrix(3, 1, {2, 2, 1}));
  Var y = sum_all(pool(x, PoolMode::kMax));
  std::vector<Var> wrt{x};
  Tensor g = grad(y, wrt)[0].value();
  EXPECT_EQ(g, Tensor::matrix(3, 1, {1, 0, 0}));
}

TEST(Pool, Segmented) {
  Var x = Var::constant(Tensor::matrix(4, 1, {1, 3, 7, 2}));
  EXPECT_EQ(pool(x, PoolMode::kMax, 2).value(), Tensor::matrix(2, 1, {3, 7}));
  EXPECT_THROW(pool(x, PoolMode::kMax, 3), DimensionError);
}

TEST(Adam, ZeroGradientIsNoOpForManySteps) {
  Parameter p("p", Tensor::matrix(1, 3, {0.5, -1.0, 2.0}));
  std::vector<Parameter> ps{p};
  AdamState st;
  for (int i = 0; i < 50; ++i) {
    p.zero_grad();
    adam_step(ps, st);
  }
  EXPECT_EQ(p.value(), Tensor::matrix(1, 3, {0.5, -1.0, 2.0}));
  EXPECT_EQ(st.t, 50u);
}

TEST(Adam, FirstStepHandEvaluated) {
  Parameter p("p", Tensor::scalar(1.0));
  std::vector<Parameter> ps{p};
  AdamState st;
  st.config = {0.1, 0.0, 0.99, 1e-8};
  p.grad()[0] = 1.0;
  adam_step(ps, st);
  // m_hat = 1, v_hat = 1 -> step lr / (1 + eps).
  EXPECT_NEAR(p.value()[0], 1.0 - 0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(p.grad()[0], 1.0);
}

TEST(Adam, IdenticalParametersGetIdenticalUpdates) {
  Parameter a("a", Tensor::matrix(1, 2, {0.3, 0.7}));
  Parameter b("b", Tensor::matrix(1, 2, {0.3, 0.7}));
  std::vector<Parameter> ps{a, b};
  AdamState st;
  st.config.lr = 0.01;
  for (int i = 0; i < 5; ++i) {
    a.grad() = Tensor::matrix(1, 2, {0.1 * i, -0.2});
    b.grad() = a.grad();
    adam_step(ps, st);
  }
  EXPECT_EQ(a.value(), b.value());
}

TEST(GradCheck, SquareAtThree) {
  auto f = [](const Var& x) { return sum_all(square(x)); };
  EXPECT_LT(grad_check(f, Tensor::scalar(3.0)), 1e-8);
}

TEST(GradCheck, SumTanhRandom) {
  Rng rng(11);
  auto f = [](const Var& x) { return sum_all(tanh(x)); };
  EXPECT_LT(grad_check(f, random_tensor(rng, 4, 5)), 1e-6);
}

TEST(GradCheck, NonFiniteFunctionThrows) {
  auto f = [](const Var& x) { return sum_all(sqrt(scale(x, -1.0))); };
  EXPECT_THROW(grad_check(f, Tensor::scalar(1.0)), NumericError);
}

// Every differentiable primitive at f64, eps = 1e-5, random inputs in [-1, 1].
TEST(GradCheck, EveryPrimitiveBelowOneInAMillion) {
  for (const auto& [name, err] : mrgan::testing::check_primitives()) EXPECT_LT(err, 1e-6) << name;
}

// The create_graph path: the gradient of a function is itself differentiated
// and compared against central differences of the first-order gradient.
TEST(GradCheck, SecondOrderThroughCriticLikeStack) {
  Rng rng(5);
  const Tensor w1 = random_tensor(rng, 3, 6);
  const Tensor w2 = random_tensor(rng, 6, 2);
  const Tensor x0 = random_tensor(rng, 5, 3);
  // h(W) = || d/dx sum(pool(leaky(x W1) W2 ... )) ||^2 as a function of W1.
  auto f = [&](const Var& w) {
    Var x = Var::leaf(x0, true);
    Var hid = leaky_relu(matmul(x, w));
    Var out = sum_all(mul(tanh(pool(matmul(hid, Var::constant(w2)), PoolMode::kMax)),
                          Var::constant(Tensor::matrix(1, 2, {1.0, -0.7}))));
    std::vector<Var> wrt{x};
    Var gx = grad(out, wrt, true)[0];
    return sum_all(square(gx));
  };
  EXPECT_LT(grad_check(f, w1), 1e-6);
}

TEST(Autograd, ForwardIsDeterministic) {
  Rng rng(3);
  const Tensor a = random_tensor(rng, 8, 4);
  const Tensor w = random_tensor(rng, 4, 4);
  auto run = [&] {
    return tanh(matmul(leaky_relu(Var::constant(a)), Var::constant(w))).value();
  };
  EXPECT_EQ(run(), run());
}

TEST(Autograd, NoGradGuardStopsRecording) {
  Var x = Var::leaf(Tensor::scalar(2.0));
  {
    NoGradGuard ng;
    EXPECT_FALSE(square(x).requires_grad());
  }
  EXPECT_TRUE(square(x).requires_grad());
}

TEST(Autograd, BackwardAccumulatesIntoLeaves) {
  Parameter p("p", Tensor::matrix(1, 2, {1.0, 2.0}));
  backward(sum_all(square(p.var())));
  backward(sum_all(p.var()));
  EXPECT_EQ(p.grad(), Tensor::matrix(1, 2, {3.0, 5.0}));
  p.zero_grad();
  EXPECT_EQ(p.grad(), Tensor::matrix(1, 2, {0.0, 0.0}));
}
