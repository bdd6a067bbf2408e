#include <doctest.h>

#include <cmath>

#include "pnnet/grad_check.hpp"
#include "pnnet/ops.hpp"
#include "support/gradient_cases.hpp"
#include "support/oracles.hpp"
#include "support/random.hpp"

using namespace pnnet;
using namespace pnnet::testing;

TEST_CASE("shape rejects zero extents and bad ranks") {
  CHECK_THROWS_AS(Shape({2, 0}), ShapeError);
  CHECK_THROWS_AS(Shape({1, 1, 1, 1, 1}), ShapeError);
  CHECK(Shape({2, 3, 4}).numel() == 24);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<float>(3)), ShapeError);
}

TEST_CASE("conv2d of a zero input is zero") {
  const Tensor input(Shape{1, 1, 3, 3});
  const Tensor weight(Shape{1, 1, 2, 2}, {0.3f, -1.f, 2.f, 5.f});
  const Tensor out = conv2d_forward(input, weight, Tensor(Shape{1}));
  CHECK(out.shape() == Shape{1, 1, 2, 2});
  for (float v : out.data()) CHECK(v == 0.f);
}

TEST_CASE("conv2d with a 1x1 kernel is a scalar multiply") {
  const Tensor input(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  const Tensor out = conv2d_forward(input, Tensor(Shape{1, 1, 1, 1}, {2}), Tensor(Shape{1}));
  CHECK(out.data()[0] == 2.f);
  CHECK(out.data()[1] == 4.f);
  CHECK(out.data()[2] == 6.f);
  CHECK(out.data()[3] == 8.f);
}

TEST_CASE("conv2d agrees with the direct convolution oracle") {
  Rng rng(11);
  struct Case {
    Shape in, w;
  };
  const Case cases[] = {
      {{2, 3, 8, 8}, {4, 3, 3, 3}},
      {{1, 1, 32, 32}, {32, 1, 7, 7}},    // first layer
      {{1, 32, 13, 13}, {64, 32, 6, 6}},  // second layer
  };
  for (const Case& c : cases) {
    const Tensor input = random_tensor<float>(c.in, rng);
    const double bound = 1.0 / std::sqrt(static_cast<double>(c.w[1] * c.w[2] * c.w[3]));
    const Tensor weight = random_tensor<float>(c.w, rng, -bound, bound);
    const Tensor bias = random_tensor<float>(Shape{c.w[0]}, rng, -bound, bound);
    const Tensor fast = conv2d_forward(input, weight, bias);
    const Tensor slow = naive_conv2d(input, weight, bias);
    REQUIRE(fast.shape() == slow.shape());
    float worst = 0;
    for (std::size_t i = 0; i < fast.size(); ++i) worst = std::max(worst, std::abs(fast[i] - slow[i]));
    CHECK(worst < 1e-5f);
  }
}

TEST_CASE("conv2d shape errors name the axis") {
  const Tensor input(Shape{1, 2, 5, 5});
  try {
    conv2d_forward(input, Tensor(Shape{1, 3, 3, 3}), Tensor(Shape{1}));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(e.axis() == "channels");
  }
  try {
    conv2d_forward(input, Tensor(Shape{1, 2, 6, 3}), Tensor(Shape{1}));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(e.axis() == "rows");
  }
  CHECK_THROWS_AS(conv2d_forward(input, Tensor(Shape{2, 2, 3, 3}), Tensor(Shape{3})), ShapeError);
}

TEST_CASE("conv2d backward of zero upstream is zero") {
  Rng rng(3);
  const Tensor input = random_tensor<float>(Shape{2, 2, 5, 5}, rng);
  const Tensor weight = random_tensor<float>(Shape{3, 2, 2, 2}, rng);
  const Conv2dGrads<float> g = conv2d_backward(input, weight, Tensor(Shape{2, 3, 4, 4}));
  for (const Tensor* t : {&g.grad_input, &g.grad_weight, &g.grad_bias}) {
    for (float v : t->data()) CHECK(v == 0.f);
  }
}

TEST_CASE("conv2d backward with a 1x1 kernel reduces input times upstream") {
  Rng rng(4);
  const TensorD input = random_tensor(Shape{2, 1, 3, 3}, rng);
  const TensorD upstream = random_tensor(Shape{2, 1, 3, 3}, rng);
  const Conv2dGrads<double> g = conv2d_backward(input, TensorD(Shape{1, 1, 1, 1}, {0.7}), upstream);
  double expected = 0;
  for (std::size_t i = 0; i < input.size(); ++i) expected += input[i] * upstream[i];
  CHECK(g.grad_weight[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("tanh forward and backward at zero") {
  const Tensor zero(Shape{2, 3});
  const Tensor y = tanh_forward(zero);
  for (float v : y.data()) CHECK(v == 0.f);
  const Tensor upstream(Shape{2, 3}, {1, -2, 3, -4, 5, -6});
  CHECK(tanh_backward(zero, upstream) == upstream);
}

TEST_CASE("single precision tanh tracks the double reference") {
  constexpr std::size_t n = 200001;
  Tensor x(Shape{n});
  for (std::size_t i = 0; i < n; ++i) x[i] = -12.0f + 24.0f * static_cast<float>(i) / static_cast<float>(n - 1);
  const Tensor y = tanh_forward(x);
  double worst = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ref = std::tanh(static_cast<double>(x[i]));
    worst = std::max(worst, std::abs(y[i] - ref) / std::max(std::abs(ref), 1e-30));
    REQUIRE(std::abs(y[i]) < 1.0f);
    if (i > 0) REQUIRE(y[i] >= y[i - 1] - 4e-7f);  // a few ulp of 1
  }
  CHECK(worst < 1e-6);
  const Tensor tiny(Shape{3}, std::vector<float>{1e-5f, -3e-4f, 0.0f});
  const Tensor ty = tanh_forward(tiny);
  CHECK(ty == tiny);
}

TEST_CASE("maxpool picks the window maximum") {
  const Tensor single(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  const MaxPoolResult<float> r = maxpool2_forward(single);
  CHECK(r.output[0] == 4.f);
  CHECK(r.argmax.winner[0] == 3);

  const Tensor constant(Shape{2, 3, 4, 6}, 0.25f);
  const MaxPoolResult<float> c = maxpool2_forward(constant);
  CHECK(c.output.shape() == Shape{2, 3, 2, 3});
  for (float v : c.output.data()) CHECK(v == 0.25f);
  // Ties resolve to the first cell.
  for (auto w : c.argmax.winner) CHECK(w == 0);
}

TEST_CASE("maxpool agrees with the window-scan oracle") {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const Tensor x = random_tensor<float>(Shape{1, 1, 4, 4}, rng);
    const MaxPoolResult<float> r = maxpool2_forward(x);
    const WindowMax oracle = window_max(x);
    CHECK(r.output == oracle.output);
    CHECK(r.argmax.winner == oracle.winner);
  }
}

TEST_CASE("maxpool rejects odd extents and stale maps") {
  CHECK_THROWS_AS(maxpool2_forward(Tensor(Shape{1, 1, 3, 4})), ShapeError);
  CHECK_THROWS_AS(maxpool2_forward(Tensor(Shape{1, 1, 4, 5})), ShapeError);
  const MaxPoolResult<float> r = maxpool2_forward(Tensor(Shape{1, 1, 4, 4}));
  CHECK_THROWS_AS(maxpool2_backward(r.argmax, Tensor(Shape{1, 1, 3, 2})), ShapeError);
}

TEST_CASE("maxpool backward routes to exactly one cell per window") {
  const Tensor single(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  const MaxPoolResult<float> r = maxpool2_forward(single);
  const Tensor g = maxpool2_backward(r.argmax, Tensor(Shape{1, 1, 1, 1}, {2.5f}));
  CHECK(g.data()[0] == 0.f);
  CHECK(g.data()[1] == 0.f);
  CHECK(g.data()[2] == 0.f);
  CHECK(g.data()[3] == 2.5f);
  const Tensor zero_grad = maxpool2_backward(r.argmax, Tensor(Shape{1, 1, 1, 1}));
  for (float v : zero_grad.data()) CHECK(v == 0.f);

  Rng rng(6);
  const Tensor x = random_tensor<float>(Shape{2, 3, 6, 4}, rng);
  const MaxPoolResult<float> big = maxpool2_forward(x);
  const Tensor up = random_tensor<float>(big.output.shape(), rng, 0.5, 1.0);
  const Tensor gx = maxpool2_backward(big.argmax, up);
  for (std::size_t plane = 0; plane < 6; ++plane)
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t xw = 0; xw < 2; ++xw) {
        int nonzero = 0;
        for (int k = 0; k < 4; ++k) nonzero += gx.at(plane / 3, plane % 3, 2 * y + k / 2, 2 * xw + k % 2) != 0.f;
        CHECK(nonzero == 1);
      }
}

TEST_CASE("linear layer examples") {
  Rng rng(7);
  const Tensor x = random_tensor<float>(Shape{3, 4}, rng);
  Tensor eye(Shape{4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye.at(i, i) = 1.f;
  CHECK(linear_forward(x, eye, Tensor(Shape{4})) == x);

  const Tensor bias(Shape{2}, {0.5f, -1.5f});
  const Tensor out = linear_forward(Tensor(Shape{3, 4}), random_tensor<float>(Shape{2, 4}, rng), bias);
  for (std::size_t b = 0; b < 3; ++b) {
    CHECK(out.at(b, 0) == 0.5f);
    CHECK(out.at(b, 1) == -1.5f);
  }
  CHECK_THROWS_AS(linear_forward(x, Tensor(Shape{2, 5}), bias), ShapeError);
}

TEST_CASE("l2 distance examples") {
  const Tensor a(Shape{2}, {3, 0});
  const Tensor b(Shape{2}, {0, 4});
  CHECK(l2_distance(a, a) == 0.0);
  CHECK(l2_distance(a, b) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK_THROWS_AS(l2_distance(a, Tensor(Shape{3})), ShapeError);
  // Coincident points: the clamped denominator keeps the gradient finite.
  const Tensor g = l2_distance_backward(a, a, 1.0);
  for (float v : g.data()) CHECK(v == 0.f);
}

TEST_CASE("finite-difference agreement of every layer") {
  Rng rng(2024);
  for (int rep = 0; rep < 10; ++rep) {
    for (auto* fn : {conv2d_grad_case, tanh_grad_case, maxpool_grad_case, linear_grad_case, l2_grad_case}) {
      const CaseResult r = fn(rng);
      INFO(r.where);
      CHECK(r.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("grad_check on a quadratic") {
  Rng rng(8);
  const TensorD x0 = random_tensor(Shape{10}, rng);
  const GradCheckReport r = grad_check(
      [](const TensorD& x) {
        ValueAndGrad out{0.0, TensorD(x.shape())};
        for (std::size_t i = 0; i < x.size(); ++i) {
          out.value += x[i] * x[i];
          out.grad[i] = 2 * x[i];
        }
        return out;
      },
      x0);
  CHECK(r.checked == 10);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("grad_check on a tanh composition") {
  Rng rng(9);
  const TensorD x0 = random_tensor(Shape{3, 4}, rng, -1.5, 1.5);
  const GradCheckReport r = grad_check(
      [](const TensorD& x) {
        const TensorD inner = tanh_forward(x);
        const TensorD outer = tanh_forward(inner);
        double value = 0;
        for (double v : outer.data()) value += v;
        const TensorD g_inner = tanh_backward(outer, TensorD(x.shape(), 1.0));
        return ValueAndGrad{value, tanh_backward(inner, g_inner)};
      },
      x0);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("grad_check errors") {
  const TensorD x(Shape{2}, {1.0, 2.0});
  auto fn = [](const TensorD& v) { return ValueAndGrad{std::log(v[0]), TensorD(v.shape(), {1 / v[0], 0.0})}; };
  GradCheckOptions bad_step;
  bad_step.step = 0;
  CHECK_THROWS_AS(grad_check(fn, x, bad_step), ConfigError);
  CHECK_THROWS_AS(grad_check(fn, TensorD(Shape{2}, {-1.0, 0.0})), NumericError);
}

TEST_CASE("forward kernels are deterministic") {
  Rng rng(10);
  const Tensor input = random_tensor<float>(Shape{2, 3, 9, 9}, rng);
  const Tensor weight = random_tensor<float>(Shape{4, 3, 4, 4}, rng);
  const Tensor bias = random_tensor<float>(Shape{4}, rng);
  CHECK(conv2d_forward(input, weight, bias) == conv2d_forward(input, weight, bias));
}
