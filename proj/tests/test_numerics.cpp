#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "rd/numerics/fdcheck.hpp"
#include "rd/numerics/ops.hpp"
#include "rd/numerics/rng.hpp"
#include "rd/numerics/tape.hpp"
#include "rd/numerics/tensor.hpp"

using namespace rd;

namespace {

// Runs forward once under a tape, backs the scalar up, then verifies every
// parameter gradient against central differences of the same forward.
double fd_check(const std::function<Tensor()>& forward, const std::vector<Tensor>& params,
                double h = 1e-6) {
  for (Tensor p : params) p.zero_grad();
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = forward();
  }
  tape.backward(loss);
  FdCheckOptions opts;
  opts.h = h;
  return finite_difference_check([&] { return forward().value(); }, params, opts);
}

Tensor random_tensor(Shape shape, uint64_t seed, bool rg = true) {
  auto rng = make_rng(seed, "test");
  return Tensor::randn(std::move(shape), rng, 1.0, rg);
}

}  // namespace

TEST_CASE("softmax examples") {
  auto s = softmax(Tensor::from_vector({2}, {0.0, 0.0}), 0);
  CHECK(s.at({0}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.at({1}) == doctest::Approx(0.5).epsilon(1e-12));

  auto sat = softmax(Tensor::from_vector({2}, {1e9, 0.0}), 0);
  CHECK(std::abs(sat.at({0}) - 1.0) < 1e-12);
  CHECK(std::abs(sat.at({1})) < 1e-12);

  // Frozen from a high-precision e^x / sum e^x evaluation.
  auto t = softmax(Tensor::from_vector({3}, {1.0, 2.0, 3.0}), 0);
  CHECK(t.at({0}) == doctest::Approx(0.09003057317038046).epsilon(1e-10));
  CHECK(t.at({1}) == doctest::Approx(0.24472847105479767).epsilon(1e-10));
  CHECK(t.at({2}) == doctest::Approx(0.66524095577482183).epsilon(1e-10));

  CHECK_THROWS_AS(softmax(t, 3), ShapeError);
}

TEST_CASE("softmax properties: rows sum to 1, shift invariance") {
  auto rng = make_rng(7, "softmax-prop");
  for (int rep = 0; rep < 20; ++rep) {
    Tensor x = Tensor::randn({4, 5}, rng, 3.0);
    Tensor s = softmax(x, 1);
    for (int i = 0; i < 4; ++i) {
      double sum = 0.0;
      for (int j = 0; j < 5; ++j) sum += s.at({i, j});
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
    const double c = 13.7;
    Tensor shifted = x.clone();
    for (std::size_t i = 0; i < shifted.numel(); ++i) shifted.data()[i] += c;
    Tensor s2 = softmax(shifted, 1);
    for (std::size_t i = 0; i < s.numel(); ++i) CHECK(std::abs(s.data()[i] - s2.data()[i]) < 1e-12);
  }
}

TEST_CASE("softmax over non-last axis") {
  Tensor x = Tensor::from_vector({2, 2}, {0.0, 1.0, 0.0, 3.0});
  Tensor s = softmax(x, 0);
  CHECK(s.at({0, 0}) == doctest::Approx(0.5));
  CHECK(s.at({0, 1}) + s.at({1, 1}) == doctest::Approx(1.0));
}

TEST_CASE("kl_divergence examples") {
  Tensor p = Tensor::from_vector({3}, {0.2, 0.3, 0.5});
  CHECK(kl_divergence(p, p).value() == doctest::Approx(0.0).epsilon(1e-14));

  CHECK(kl_divergence(Tensor::from_vector({2}, {1.0, 0.0}),
                      Tensor::from_vector({2}, {0.5, 0.5}))
            .value() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // 0.5*ln 2 + 0.5*ln(2/3)
  CHECK(kl_divergence(Tensor::from_vector({2}, {0.5, 0.5}),
                      Tensor::from_vector({2}, {0.25, 0.75}))
            .value() == doctest::Approx(0.14384103622589045).epsilon(1e-10));

  CHECK_THROWS_AS(kl_divergence(p, Tensor::from_vector({2}, {0.5, 0.5})), ShapeError);
}

TEST_CASE("kl_divergence nonnegative on random distributions") {
  auto rng = make_rng(11, "kl-prop");
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> pv(6), qv(6);
    double ps = 0, qs = 0;
    for (int i = 0; i < 6; ++i) {
      pv[i] = u(rng);
      qv[i] = u(rng);
      ps += pv[i];
      qs += qv[i];
    }
    for (int i = 0; i < 6; ++i) {
      pv[i] /= ps;
      qv[i] /= qs;
    }
    CHECK(kl_divergence(Tensor::from_vector({6}, pv), Tensor::from_vector({6}, qv)).value() >=
          -1e-12);
  }
}

TEST_CASE("cosine_similarity examples") {
  Tensor u = Tensor::from_vector({3}, {1.0, 2.0, -1.0});
  CHECK(cosine_similarity(u, u).value() == doctest::Approx(1.0).epsilon(1e-12));

  Tensor a = Tensor::from_vector({2}, {1.0, 0.0});
  Tensor b = Tensor::from_vector({2}, {0.0, 5.0});
  CHECK(cosine_similarity(a, b).value() == doctest::Approx(0.0));

  Tensor neg = Tensor::from_vector({3}, {-1.0, -2.0, 1.0});
  CHECK(cosine_similarity(u, neg).value() == doctest::Approx(-1.0).epsilon(1e-12));

  Tensor z = Tensor::zeros({3});
  CHECK(cosine_similarity(u, z).value() == 0.0);
}

TEST_CASE("gelu examples") {
  CHECK(gelu(Tensor::scalar(0.0)).value() == 0.0);
  CHECK(gelu(Tensor::scalar(10.0)).value() == doctest::Approx(10.0).epsilon(1e-6));
  // 1 * Phi(1), frozen from an erf oracle.
  CHECK(gelu(Tensor::scalar(1.0)).value() == doctest::Approx(0.8413447460685429).epsilon(1e-12));
}

TEST_CASE("layer_norm examples") {
  Tensor gain1 = Tensor::full({4}, 1.0);
  Tensor bias0 = Tensor::zeros({4});

  Tensor constant = Tensor::full({4}, 3.7);
  Tensor y = layer_norm(constant, gain1, bias0);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(y.data()[i]) < 1e-5);

  Tensor pm = Tensor::from_vector({2}, {1.0, -1.0});
  Tensor y2 = layer_norm(pm, Tensor::full({2}, 1.0), Tensor::zeros({2}), 1e-15);
  CHECK(y2.at({0}) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(y2.at({1}) == doctest::Approx(-1.0).epsilon(1e-7));

  Tensor any = Tensor::from_vector({4}, {4.0, -1.0, 0.5, 9.0});
  Tensor y3 = layer_norm(any, Tensor::zeros({4}), Tensor::full({4}, 2.5));
  for (std::size_t i = 0; i < 4; ++i) CHECK(y3.data()[i] == doctest::Approx(2.5));

  CHECK_THROWS_AS(layer_norm(any, Tensor::zeros({3}), bias0), ShapeError);
}

TEST_CASE("layer_norm pre-affine mean/variance") {
  auto rng = make_rng(3, "ln-prop");
  Tensor x = Tensor::randn({8, 16}, rng, 2.0);
  Tensor y = layer_norm(x, Tensor::full({16}, 1.0), Tensor::zeros({16}));
  for (int r = 0; r < 8; ++r) {
    double mean = 0, var = 0;
    for (int j = 0; j < 16; ++j) mean += y.at({r, j});
    mean /= 16.0;
    for (int j = 0; j < 16; ++j) var += (y.at({r, j}) - mean) * (y.at({r, j}) - mean);
    var /= 16.0;
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::abs(var - 1.0) < 1e-8);
  }
}

TEST_CASE("cross_entropy examples") {
  CHECK(cross_entropy(Tensor::from_vector({2}, {0.0, 0.0}),
                      Tensor::from_vector({2}, {1.0, 0.0}))
            .value() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  CHECK(cross_entropy(Tensor::from_vector({3}, {5.0, -2.0, 1.0}), Tensor::zeros({3})).value() ==
        0.0);

  CHECK(std::abs(cross_entropy(Tensor::from_vector({2}, {1e9, 0.0}),
                               Tensor::from_vector({2}, {1.0, 0.0}))
                     .value()) < 1e-9);
}

TEST_CASE("tape: second backward is an error") {
  Tensor x = Tensor::from_vector({2}, {1.0, 2.0}, true);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = sum_all(mul(x, x));
  }
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
  CHECK_THROWS(tape.backward(loss));
}

TEST_CASE("tape: gradients accumulate additively across reuse") {
  Tensor x = Tensor::from_vector({3}, {1.0, -2.0, 0.5}, true);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    // x appears twice; its grad must be the sum of both paths.
    loss = sum_all(add(x, x));
  }
  tape.backward(loss);
  for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == doctest::Approx(2.0));
}

TEST_CASE("no tape means no gradient tracking") {
  Tensor x = Tensor::from_vector({2}, {1.0, 2.0}, true);
  Tensor y = mul(x, x);
  CHECK(!y.requires_grad());
}

TEST_CASE("finite_difference_check reference cases") {
  // f = sum(theta^2): gradient is linear, error should be tiny.
  Tensor theta = random_tensor({8}, 21);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = sum_all(mul(theta, theta));
  }
  tape.backward(loss);
  double err = finite_difference_check([&] { return sum_all(mul(theta, theta)).value(); }, {theta});
  CHECK(err < 1e-7);

  // Constant f with unused parameter: both sides are zero.
  Tensor unused = Tensor::zeros({4}, true);
  double err2 = finite_difference_check([] { return 3.0; }, {unused});
  CHECK(err2 == 0.0);
}

TEST_CASE("per-op finite difference checks on random small inputs") {
  SUBCASE("matmul shared weight") {
    Tensor x = random_tensor({2, 3, 4}, 1);
    Tensor W = random_tensor({4, 6}, 2);
    auto f = [&] { return sum_all(mul(matmul(x, W), random_tensor({2, 3, 6}, 50, false))); };
    CHECK(fd_check(f, {x, W}) < 1e-6);
  }
  SUBCASE("matmul transpose_b batched") {
    Tensor q = random_tensor({2, 3, 4}, 3);
    Tensor k = random_tensor({2, 5, 4}, 4);
    auto f = [&] { return sum_all(mul(matmul(q, k, true), random_tensor({2, 3, 5}, 51, false))); };
    CHECK(fd_check(f, {q, k}) < 1e-6);
  }
  SUBCASE("softmax") {
    Tensor x = random_tensor({3, 5}, 5);
    auto f = [&] { return sum_all(mul(softmax(x, 1), random_tensor({3, 5}, 52, false))); };
    CHECK(fd_check(f, {x}) < 1e-6);
  }
  SUBCASE("layer_norm") {
    Tensor x = random_tensor({3, 6}, 6);
    Tensor g = random_tensor({6}, 7);
    Tensor b = random_tensor({6}, 8);
    auto f = [&] { return sum_all(mul(layer_norm(x, g, b), random_tensor({3, 6}, 53, false))); };
    CHECK(fd_check(f, {x, g, b}) < 1e-6);
  }
  SUBCASE("gelu / relu") {
    Tensor x = random_tensor({10}, 9);
    auto f = [&] { return sum_all(mul(gelu(x), random_tensor({10}, 54, false))); };
    CHECK(fd_check(f, {x}) < 1e-6);
    auto f2 = [&] { return sum_all(mul(relu(x), random_tensor({10}, 55, false))); };
    CHECK(fd_check(f2, {x}) < 1e-6);
  }
  SUBCASE("cross_entropy") {
    Tensor logits = random_tensor({7}, 10);
    Tensor onehot = Tensor::zeros({7});
    onehot.data()[3] = 1.0;
    auto f = [&] { return cross_entropy(logits, onehot); };
    CHECK(fd_check(f, {logits}) < 1e-6);
  }
  SUBCASE("kl through softmax") {
    Tensor s = random_tensor({6}, 11);
    Tensor qfix = softmax(random_tensor({6}, 12, false), 0);
    auto f = [&] { return kl_divergence(softmax(s, 0), qfix); };
    CHECK(fd_check(f, {s}) < 1e-6);
  }
  SUBCASE("cosine_similarity") {
    Tensor u = random_tensor({5}, 13);
    Tensor v = random_tensor({5}, 14);
    auto f = [&] { return cosine_similarity(u, v); };
    CHECK(fd_check(f, {u, v}) < 1e-6);
  }
  SUBCASE("embedding_lookup, permute, bias") {
    Tensor table = random_tensor({9, 4}, 15);
    Tensor bias = random_tensor({4}, 16);
    std::vector<int> ids = {1, 4, 8, 1, 0, 2};
    auto f = [&] {
      Tensor e = embedding_lookup(table, ids, 2, 3);
      Tensor p = permute(add_bias(e, bias), {1, 0, 2});
      return sum_all(mul(p, random_tensor({3, 2, 4}, 56, false)));
    };
    CHECK(fd_check(f, {table, bias}) < 1e-6);
  }
}

TEST_CASE("tensor invariants and errors") {
  CHECK_THROWS_AS(Tensor::from_vector({2, 2}, {1.0, 2.0}), ShapeError);
  CHECK_THROWS_AS(Tensor::zeros({0, 3}), ShapeError);
  Tensor t = Tensor::zeros({2, 3}, true);
  CHECK(t.numel() == 6);
  CHECK(t.has_grad());
  Tensor alias = t;
  alias.set_requires_grad(false);
  CHECK(!t.requires_grad());  // flag shared across shallow copies
}

TEST_CASE("embedding_lookup rejects out-of-range ids") {
  Tensor table = Tensor::zeros({4, 2});
  std::vector<int> ids = {0, 5};
  CHECK_THROWS(embedding_lookup(table, ids, 1, 2));
}
