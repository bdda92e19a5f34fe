#include "ramcnn/ndcore.hpp"

#include <cmath>

#include "doctest.h"
#include "ramcnn/errors.hpp"
#include "testutil.hpp"

using namespace ramcnn;
using namespace testutil;

TEST_CASE("conv1d_forward: identity filter passes the input through") {
  ChannelMap in(1, 5);
  in.data = {0, 0, 1, 0, 0};
  ConvFilterBank f(1, 1, 1);
  f.w(0, 0, 0) = 1.0;
  const ChannelMap out = conv1d_forward(in, f);
  CHECK(out.length == 5);
  for (int x = 0; x < 5; ++x) CHECK(out.at(0, x) == doctest::Approx(in.at(0, x)));
}

TEST_CASE("conv1d_forward: box filter on [1,2,3] same-padded") {
  ChannelMap in(1, 3);
  in.data = {1, 2, 3};
  ConvFilterBank f(1, 1, 3);
  f.w(0, 0, 0) = f.w(0, 0, 1) = f.w(0, 0, 2) = 1.0;
  const ChannelMap out = conv1d_forward(in, f);
  // Frozen from the naive nested-loop oracle.
  CHECK(out.at(0, 0) == doctest::Approx(3.0));
  CHECK(out.at(0, 1) == doctest::Approx(6.0));
  CHECK(out.at(0, 2) == doctest::Approx(5.0));
  const ChannelMap oracle = naive_conv1d(in, f);
  for (int x = 0; x < 3; ++x) CHECK(out.at(0, x) == doctest::Approx(oracle.at(0, x)));
}

TEST_CASE("conv1d_forward matches the brute-force loop oracle on random cases") {
  Rng rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    const int in_ch = 1 + trial % 3;
    const int out_ch = 1 + (trial + 1) % 4;
    const int size = 1 + static_cast<int>(uniform_int(rng, 0, 8));
    const int len = 3 + static_cast<int>(uniform_int(rng, 0, 20));
    const ChannelMap in = random_map(rng, in_ch, len);
    ConvFilterBank f(out_ch, in_ch, size);
    f.weights = random_vector(rng, f.weights.size());
    f.bias = random_vector(rng, f.bias.size());
    const ChannelMap out = conv1d_forward(in, f);
    const ChannelMap oracle = naive_conv1d(in, f);
    for (std::size_t i = 0; i < out.data.size(); ++i)
      CHECK(std::abs(out.data[i] - oracle.data[i]) < 1e-12);
  }
}

TEST_CASE("conv1d_forward: the spec's 2-channel case against the oracle") {
  Rng rng(7);
  const ChannelMap in = random_map(rng, 2, 16);
  ConvFilterBank f(3, 2, 8);
  f.weights = random_vector(rng, f.weights.size());
  f.bias = random_vector(rng, f.bias.size());
  const ChannelMap out = conv1d_forward(in, f);
  const ChannelMap oracle = naive_conv1d(in, f);
  REQUIRE(out.data.size() == oracle.data.size());
  for (std::size_t i = 0; i < out.data.size(); ++i)
    CHECK(std::abs(out.data[i] - oracle.data[i]) < 1e-12);
}

TEST_CASE("conv1d_forward rejects channel mismatch") {
  ChannelMap in(2, 4);
  ConvFilterBank f(1, 3, 2);
  CHECK_THROWS_AS(conv1d_forward(in, f), DimensionError);
}

TEST_CASE("conv1d_backward: zero cotangent gives zero gradients") {
  Rng rng(3);
  const ChannelMap in = random_map(rng, 2, 8);
  ConvFilterBank f(2, 2, 3);
  f.weights = random_vector(rng, f.weights.size());
  const ChannelMap zero(2, 8);
  const ConvGrads g = conv1d_backward(zero, in, f);
  for (double v : g.input.data) CHECK(v == 0.0);
  for (double v : g.filters.weights) CHECK(v == 0.0);
  for (double v : g.filters.bias) CHECK(v == 0.0);
}

TEST_CASE("conv1d_backward: identity filter routes the cotangent through") {
  Rng rng(4);
  const ChannelMap in = random_map(rng, 1, 6);
  ConvFilterBank f(1, 1, 1);
  f.w(0, 0, 0) = 1.0;
  const ChannelMap g_out = random_map(rng, 1, 6);
  const ConvGrads g = conv1d_backward(g_out, in, f);
  for (int x = 0; x < 6; ++x) CHECK(g.input.at(0, x) == doctest::Approx(g_out.at(0, x)));
}

TEST_CASE("conv1d_backward matches finite differences") {
  Rng rng(11);
  ChannelMap in = random_map(rng, 2, 10);
  ConvFilterBank f(3, 2, 5);
  f.weights = random_vector(rng, f.weights.size());
  f.bias = random_vector(rng, f.bias.size());
  const ChannelMap cot = random_map(rng, 3, 10);

  // Scalar objective: sum(cotangent * forward(...)).
  auto objective = [&]() {
    const ChannelMap out = conv1d_forward(in, f);
    double s = 0.0;
    for (std::size_t i = 0; i < out.data.size(); ++i) s += cot.data[i] * out.data[i];
    return s;
  };
  const ConvGrads g = conv1d_backward(cot, in, f);

  for (std::size_t i = 0; i < in.data.size(); ++i)
    CHECK(rel_err(g.input.data[i], central_diff(objective, in.data, i)) < 1e-5);
  for (std::size_t i = 0; i < f.weights.size(); ++i)
    CHECK(rel_err(g.filters.weights[i], central_diff(objective, f.weights, i)) < 1e-5);
  for (std::size_t i = 0; i < f.bias.size(); ++i)
    CHECK(rel_err(g.filters.bias[i], central_diff(objective, f.bias, i)) < 1e-5);
}

TEST_CASE("leaky_relu values") {
  CHECK(leaky_relu({3.0}, 0.2)[0] == doctest::Approx(3.0));
  CHECK(leaky_relu({-1.0}, 0.2)[0] == doctest::Approx(-0.2));
  CHECK(leaky_relu({0.0}, 0.2)[0] == 0.0);
}

TEST_CASE("leaky_relu_backward values and finite differences") {
  CHECK(leaky_relu_backward({2.0}, {5.0}, 0.2)[0] == doctest::Approx(2.0));
  CHECK(leaky_relu_backward({2.0}, {-5.0}, 0.2)[0] == doctest::Approx(0.4));

  Rng rng(5);
  std::vector<double> x(32);
  for (auto& v : x) {
    v = uniform_real(rng, 0.1, 1.0);  // keep away from the kink at 0
    if (uniform_real(rng, 0.0, 1.0) < 0.5) v = -v;
  }
  const std::vector<double> cot = random_vector(rng, x.size());
  auto objective = [&]() {
    const auto y = leaky_relu(x, 0.2);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += cot[i] * y[i];
    return s;
  };
  const auto g = leaky_relu_backward(cot, x, 0.2);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(rel_err(g[i], central_diff(objective, x, i)) < 1e-5);
}

TEST_CASE("maxpool2_forward: hand case and tie break") {
  ChannelMap in(1, 4);
  in.data = {1, 3, 2, 0};
  const PoolRecord rec = maxpool2_forward(in);
  CHECK(rec.output.length == 2);
  CHECK(rec.output.at(0, 0) == 3.0);
  CHECK(rec.output.at(0, 1) == 2.0);
  CHECK(rec.arg(0, 0) == 1);
  CHECK(rec.arg(0, 1) == 2);

  ChannelMap flat(1, 6);
  flat.data.assign(6, 0.7);
  const PoolRecord tied = maxpool2_forward(flat);
  for (int p = 0; p < tied.output.length; ++p) {
    CHECK(tied.output.at(0, p) == 0.7);
    CHECK(tied.arg(0, p) == 2 * p);  // leftmost wins ties
  }
}

TEST_CASE("maxpool2 length law: ceil(n/2), and 1451 -> 726 -> 363") {
  for (int n = 1; n <= 200; ++n) {
    ChannelMap in(1, n);
    for (int x = 0; x < n; ++x) in.at(0, x) = std::sin(0.1 * x);
    CHECK(maxpool2_forward(in).output.length == (n + 1) / 2);
  }
  ChannelMap in(1, 1451);
  for (int x = 0; x < 1451; ++x) in.at(0, x) = std::cos(0.01 * x);
  const PoolRecord once = maxpool2_forward(in);
  CHECK(once.output.length == 726);
  CHECK(maxpool2_forward(once.output).output.length == 363);
}

TEST_CASE("maxpool2: odd length keeps the lone last element") {
  ChannelMap in(1, 5);
  in.data = {5, 1, 2, 3, -4};
  const PoolRecord rec = maxpool2_forward(in);
  CHECK(rec.output.length == 3);
  CHECK(rec.output.at(0, 2) == -4.0);
  CHECK(rec.arg(0, 2) == 4);
}

TEST_CASE("maxpool2_backward routes gradients to the winners") {
  ChannelMap in(1, 4);
  in.data = {1, 3, 2, 0};
  const PoolRecord rec = maxpool2_forward(in);
  ChannelMap g_out(1, 2);
  g_out.data = {1, 1};
  const ChannelMap g_in = maxpool2_backward(g_out, rec);
  CHECK(g_in.data == std::vector<double>{0, 1, 1, 0});

  ChannelMap zeros(1, 2);
  for (double v : maxpool2_backward(zeros, rec).data) CHECK(v == 0.0);
}

TEST_CASE("maxpool2_backward matches finite differences away from ties") {
  Rng rng(6);
  ChannelMap in = random_map(rng, 2, 9);
  // Widen any nearly tied window so the finite difference stays on one side.
  for (int k = 0; k < in.channels; ++k)
    for (int x = 0; x + 1 < in.length; x += 2)
      if (std::abs(in.at(k, x) - in.at(k, x + 1)) < 1e-3) in.at(k, x) += 1e-2;

  const PoolRecord rec = maxpool2_forward(in);
  const ChannelMap cot = random_map(rng, 2, rec.output.length);
  auto objective = [&]() {
    const PoolRecord r = maxpool2_forward(in);
    double s = 0.0;
    for (std::size_t i = 0; i < r.output.data.size(); ++i) s += cot.data[i] * r.output.data[i];
    return s;
  };
  const ChannelMap g = maxpool2_backward(cot, rec);
  for (std::size_t i = 0; i < in.data.size(); ++i)
    CHECK(rel_err(g.data[i], central_diff(objective, in.data, i)) < 1e-5);
}

TEST_CASE("fc_forward: identity weights and hand case") {
  DenseWeights ident(3, 3);
  for (int i = 0; i < 3; ++i) ident.w(i, i) = 1.0;
  const std::vector<double> x = {0.5, -2.0, 7.0};
  CHECK(fc_forward(x, ident) == x);

  DenseWeights d(2, 2);
  d.w(0, 0) = 1.0;
  d.w(1, 1) = 1.0;
  d.bias = {1.0, 1.0};
  const auto y = fc_forward({1.0, 2.0}, d);
  CHECK(y[0] == doctest::Approx(2.0));
  CHECK(y[1] == doctest::Approx(3.0));
}

TEST_CASE("fc_forward matches the dot-product oracle") {
  Rng rng(8);
  DenseWeights d(17, 5);
  d.weights = random_vector(rng, d.weights.size());
  d.bias = random_vector(rng, d.bias.size());
  const auto x = random_vector(rng, 17);
  const auto y = fc_forward(x, d);
  const auto oracle = naive_fc(x, d);
  for (int j = 0; j < 5; ++j) CHECK(std::abs(y[j] - oracle[j]) < 1e-12);
}

TEST_CASE("fc_forward rejects dimension mismatch") {
  DenseWeights d(3, 2);
  CHECK_THROWS_AS(fc_forward({1.0, 2.0}, d), DimensionError);
}

TEST_CASE("fc_backward: bias gradient identity, zeros, finite differences") {
  Rng rng(9);
  DenseWeights d(6, 4);
  d.weights = random_vector(rng, d.weights.size());
  d.bias = random_vector(rng, d.bias.size());
  std::vector<double> x = random_vector(rng, 6);

  const std::vector<double> zeros(4, 0.0);
  const DenseGrads gz = fc_backward(zeros, x, d);
  for (double v : gz.input) CHECK(v == 0.0);
  for (double v : gz.dense.weights) CHECK(v == 0.0);

  const std::vector<double> cot = random_vector(rng, 4);
  const DenseGrads g = fc_backward(cot, x, d);
  CHECK(g.dense.bias == cot);

  auto objective = [&]() {
    const auto y = fc_forward(x, d);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += cot[i] * y[i];
    return s;
  };
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(rel_err(g.input[i], central_diff(objective, x, i)) < 1e-5);
  for (std::size_t i = 0; i < d.weights.size(); ++i)
    CHECK(rel_err(g.dense.weights[i], central_diff(objective, d.weights, i)) < 1e-5);
}

TEST_CASE("dropout: infer mode and keep_prob 1 are the identity") {
  Rng rng(10);
  const auto x = random_vector(rng, 16);
  const auto infer = dropout(x, 0.5, Mode::infer, rng);
  CHECK(infer.output == x);
  for (double m : infer.mask) CHECK(m == 1.0);
  const auto keep_all = dropout(x, 1.0, Mode::train, rng);
  CHECK(keep_all.output == x);
}

TEST_CASE("dropout: inverted scaling preserves the expected value") {
  Rng rng(12);
  const std::vector<double> x(8, 1.0);
  std::vector<double> mean(8, 0.0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto r = dropout(x, 0.5, Mode::train, rng);
    for (int j = 0; j < 8; ++j) mean[j] += r.output[j];
  }
  for (int j = 0; j < 8; ++j) CHECK(std::abs(mean[j] / draws - 1.0) < 0.05);
}

TEST_CASE("softmax_cross_entropy: uniform logits, stability, gradient") {
  const auto uniform = softmax_cross_entropy({0.4, 0.4, 0.4}, {0.0, 1.0, 0.0});
  CHECK(uniform.loss == doctest::Approx(std::log(3.0)));

  const auto big = softmax_cross_entropy({1000.0, 0.0}, {1.0, 0.0});
  CHECK(big.loss == doctest::Approx(0.0));
  CHECK(std::isfinite(big.probs[0]));

  Rng rng(13);
  std::vector<double> logits = random_vector(rng, 5, -2.0, 2.0);
  const auto label = std::vector<double>{0, 0, 1, 0, 0};
  const auto r = softmax_cross_entropy(logits, label);

  double sum = 0.0;
  for (double p : r.probs) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    sum += p;
  }
  CHECK(std::abs(sum - 1.0) < 1e-12);

  auto objective = [&]() { return softmax_cross_entropy(logits, label).loss; };
  for (std::size_t i = 0; i < logits.size(); ++i)
    CHECK(rel_err(r.grad_logits[i], central_diff(objective, logits, i)) < 1e-5);
}

TEST_CASE("softmax_cross_entropy rejects malformed labels") {
  CHECK_THROWS_AS(softmax_cross_entropy({1.0, 2.0}, {1.0}), DimensionError);
  CHECK_THROWS_AS(softmax_cross_entropy({1.0, 2.0}, {1.0, 1.0}), DataError);
  CHECK_THROWS_AS(softmax_cross_entropy({1.0, 2.0}, {0.0, 0.0}), DataError);
}
