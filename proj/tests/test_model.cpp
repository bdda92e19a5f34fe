#include "ramcnn/model.hpp"

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "ramcnn/errors.hpp"
#include "ramcnn/specgen.hpp"
#include "testutil.hpp"

using namespace ramcnn;
using namespace testutil;

namespace {

ArchConfig tiny_arch() {
  ArchConfig arch;
  arch.input_length = 32;
  arch.conv_blocks = {{2, 3}, {2, 3}};
  arch.fc1_width = 4;
  arch.n_classes = 2;
  arch.dropout_keep = 1.0;  // keeps the finite-difference objective deterministic
  return arch;
}

}  // namespace

TEST_CASE("init_model is deterministic and Glorot-shaped") {
  ArchConfig arch;  // defaults: 1451 input, two (64,8) blocks, fc1 128
  arch.n_classes = 3;
  const ModelParams a = init_model(arch, 99);
  const ModelParams b = init_model(arch, 99);
  CHECK(a.fc1.weights == b.fc1.weights);
  CHECK(a.conv[0].weights == b.conv[0].weights);
  CHECK(a.conv[1].weights == b.conv[1].weights);
  CHECK(a.fc2.weights == b.fc2.weights);

  CHECK(a.fc1.in_dim == 363 * 64);  // 23232 rows feeding FC1
  CHECK(a.fc1.out_dim == 128);
  CHECK(a.fc2.out_dim == 3);

  for (const auto& bank : a.conv)
    for (double v : bank.bias) CHECK(v == 0.0);
  for (double v : a.fc1.bias) CHECK(v == 0.0);
  for (double v : a.fc2.bias) CHECK(v == 0.0);

  const ModelParams c = init_model(arch, 100);
  CHECK(a.fc1.weights != c.fc1.weights);
}

TEST_CASE("forward: zero input with zero biases leaves only the fc2 bias") {
  ArchConfig arch = tiny_arch();
  ModelParams p = init_model(arch, 1);
  p.fc2.bias = {0.3, -0.2};
  Rng rng(0);
  const auto fwd = forward(p, std::vector<double>(32, 0.0), Mode::infer, rng);
  CHECK(fwd.logits[0] == doctest::Approx(0.3));
  CHECK(fwd.logits[1] == doctest::Approx(-0.2));
}

TEST_CASE("forward: default architecture pools 1451 down to 64 x 363") {
  ArchConfig arch;
  arch.n_classes = 3;
  const ModelParams p = init_model(arch, 2);
  Rng data_rng(5);
  const auto input = random_vector(data_rng, 1451, 0.0, 1.0);
  Rng rng(0);
  const auto fwd = forward(p, input, Mode::infer, rng);
  const ChannelMap& pool2 = fwd.cache.blocks.back().pool.output;
  CHECK(pool2.channels == 64);
  CHECK(pool2.length == 363);
  CHECK(fwd.cache.flat.size() == 64u * 363u);
  CHECK(final_pooled_length(arch) == 363);
  CHECK(flattened_dim(arch) == 23232);
}

TEST_CASE("forward: infer mode is deterministic and ignores the rng") {
  ArchConfig arch = tiny_arch();
  arch.dropout_keep = 0.5;
  const ModelParams p = init_model(arch, 3);
  Rng data_rng(6);
  const auto input = random_vector(data_rng, 32, 0.0, 1.0);
  Rng r1(111), r2(999);
  const auto a = forward(p, input, Mode::infer, r1);
  const auto b = forward(p, input, Mode::infer, r2);
  CHECK(a.logits == b.logits);

  Rng r3(111), r4(999);
  const auto t1 = forward(p, input, Mode::train, r3);
  const auto t2 = forward(p, input, Mode::train, r4);
  CHECK(t1.logits != t2.logits);  // different dropout masks
}

TEST_CASE("forward rejects wrong input length") {
  const ModelParams p = init_model(tiny_arch(), 1);
  Rng rng(0);
  CHECK_THROWS_AS(forward(p, std::vector<double>(31, 0.0), Mode::infer, rng), DimensionError);
}

TEST_CASE("flatten/unflatten round trip") {
  Rng rng(7);
  for (const auto [k, l] : {std::pair{3, 5}, std::pair{1, 9}, std::pair{8, 2}}) {
    const ChannelMap map = random_map(rng, k, l);
    const auto flat = flatten_position_major(map);
    const ChannelMap back = unflatten_position_major(flat, k, l);
    CHECK(back.data == map.data);
  }
}

TEST_CASE("backward: zero grad_logits gives all-zero gradients") {
  const ArchConfig arch = tiny_arch();
  const ModelParams p = init_model(arch, 4);
  Rng data_rng(8), rng(0);
  const auto input = random_vector(data_rng, 32, 0.0, 1.0);
  const auto fwd = forward(p, input, Mode::train, rng);
  const Gradients g = backward(p, fwd.cache, {0.0, 0.0});
  for (const auto& bank : g.conv) {
    for (double v : bank.weights) CHECK(v == 0.0);
    for (double v : bank.bias) CHECK(v == 0.0);
  }
  for (double v : g.fc1.weights) CHECK(v == 0.0);
  for (double v : g.fc2.weights) CHECK(v == 0.0);
}

TEST_CASE("backward: fc2 bias gradient equals grad_logits") {
  const ArchConfig arch = tiny_arch();
  const ModelParams p = init_model(arch, 5);
  Rng data_rng(9), rng(0);
  const auto input = random_vector(data_rng, 32, 0.0, 1.0);
  const auto fwd = forward(p, input, Mode::train, rng);
  const std::vector<double> cot = {0.7, -1.3};
  const Gradients g = backward(p, fwd.cache, cot);
  CHECK(g.fc2.bias == cot);
}

TEST_CASE("backward matches end-to-end finite differences on the tiny arch") {
  const ArchConfig arch = tiny_arch();
  for (const std::uint64_t seed : {21, 22, 23}) {
    ModelParams p = init_model(arch, seed);
    Rng data_rng(seed + 100);
    const auto input = random_vector(data_rng, 32, 0.0, 1.0);
    const auto label = onehot(1, 2);

    Rng rng(0);
    const auto fwd = forward(p, input, Mode::train, rng);
    const auto sm = softmax_cross_entropy(fwd.logits, label);
    Gradients g = backward(p, fwd.cache, sm.grad_logits);

    auto loss_of = [&]() {
      Rng r(0);
      const auto f = forward(p, input, Mode::train, r);
      return softmax_cross_entropy(f.logits, label).loss;
    };

    for_each_tensor({&p, &g}, [&](std::vector<std::vector<double>*>& t) {
      auto& theta = *t[0];
      const auto& analytic = *t[1];
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double numeric = central_diff(loss_of, theta, i);
        CHECK(rel_err(analytic[i], numeric) < 1e-4);
      }
    });
  }
}

TEST_CASE("predict: probabilities sum to 1; zero params give uniform") {
  ArchConfig arch = tiny_arch();
  ModelParams p = init_model(arch, 41);
  Rng data_rng(42);
  const auto input = random_vector(data_rng, 32, 0.0, 1.0);
  const Prediction pred = predict(p, input);
  CHECK(std::abs(pred.probs[0] + pred.probs[1] - 1.0) < 1e-12);

  for_each_tensor({&p}, [](std::vector<std::vector<double>*>& t) {
    std::fill(t[0]->begin(), t[0]->end(), 0.0);
  });
  const Prediction uniform = predict(p, input);
  for (double q : uniform.probs) CHECK(q == doctest::Approx(0.5));
  CHECK(uniform.label == 0);  // tie resolves to the lowest index
}
