#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "featcomp/error.hpp"
#include "featcomp/ndnum.hpp"

using namespace featcomp;
using namespace featcomp::ndnum;

namespace {

DenseLayer layer_of(std::vector<double> w, std::size_t out, std::size_t in, std::vector<double> b,
                    Activation a) {
  return DenseLayer(Tensor({out, in}, std::move(w)), Tensor({out}, std::move(b)), a);
}

Mlp random_mlp(Rng& rng, std::size_t in, std::size_t hidden, std::size_t out) {
  auto l1 = DenseLayer::random(in, hidden, Activation::relu, rng);
  auto l2 = DenseLayer::random(hidden, out, Activation::sigmoid, rng);
  for (auto& b : l1.bias().values()) b = rng.normal(0.0, 0.3);
  for (auto& b : l2.bias().values()) b = rng.normal(0.0, 0.3);
  return Mlp({l1, l2});
}

Tensor random_input(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return Tensor::vector(v);
}

}  // namespace

TEST_CASE("tensor shape must match data") {
  CHECK_THROWS_AS((Tensor({2, 3}, std::vector<double>(5))), PreconditionError);
  CHECK_THROWS_AS((Tensor({0}, 0.0)), PreconditionError);
  CHECK_THROWS_AS((Tensor::vector({1.0, NAN})), PreconditionError);
  const Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.at(1, 2) == 1.5);
}

TEST_CASE("dense_forward examples") {
  SUBCASE("zero sigmoid layer gives one half") {
    DenseLayer l(3, 2, Activation::sigmoid);
    const Tensor y = l.forward(Tensor::vector({5.0, -7.0, 100.0}));
    CHECK(y[0] == 0.5);
    CHECK(y[1] == 0.5);
  }
  SUBCASE("identity weights pass input through") {
    auto l = layer_of({1, 0, 0, 0, 1, 0, 0, 0, 1}, 3, 3, {0, 0, 0}, Activation::identity);
    const Tensor x = Tensor::vector({0.25, -3.0, 7.5});
    CHECK(l.forward(x).values()[0] == 0.25);
    CHECK(l.forward(x) == x);
  }
  SUBCASE("hand multiply") {
    auto l = layer_of({1, 2}, 1, 2, {1}, Activation::identity);
    CHECK(l.forward(Tensor::vector({3, 4}))[0] == 12.0);
  }
  SUBCASE("dimension mismatch names both sizes") {
    DenseLayer l(3, 1, Activation::identity);
    try {
      l.forward(Tensor::vector({1, 2}));
      FAIL("expected an error");
    } catch (const PreconditionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find('3') != std::string::npos);
      CHECK(msg.find('2') != std::string::npos);
    }
  }
}

TEST_CASE("dense_backward examples") {
  SUBCASE("backward before forward") {
    DenseLayer l(2, 1, Activation::identity);
    CHECK_THROWS_AS((l.backward(Tensor::vector({1.0}))), PreconditionError);
  }
  SUBCASE("zero upstream gives zero gradients") {
    Rng rng(3);
    auto l = DenseLayer::random(4, 3, Activation::relu, rng);
    l.forward(random_input(rng, 4));
    const auto g = l.backward(Tensor({3}, 0.0));
    for (double v : g.weights.values()) CHECK(v == 0.0);
    for (double v : g.bias.values()) CHECK(v == 0.0);
    for (double v : g.input.values()) CHECK(v == 0.0);
  }
  SUBCASE("linear unit: dLoss/dw = x") {
    auto l = layer_of({0.7}, 1, 1, {0.0}, Activation::identity);
    l.forward(Tensor::vector({-2.5}));
    const auto g = l.backward(Tensor::vector({1.0}));
    CHECK(g.weights[0] == -2.5);
    CHECK(g.bias[0] == 1.0);
    CHECK(g.input[0] == doctest::Approx(0.7).epsilon(1e-15));
  }
}

TEST_CASE("sgd_step examples") {
  std::vector<double> p{1.0};
  const std::vector<double> g{2.0};
  sgd_step(p, g, 0.1, Direction::descend);
  CHECK(p[0] == doctest::Approx(0.8).epsilon(1e-15));
  p = {1.0};
  sgd_step(p, g, 0.1, Direction::ascend);
  CHECK(p[0] == doctest::Approx(1.2).epsilon(1e-15));
  p = {1.0, -3.0};
  const std::vector<double> zero{0.0, 0.0};
  sgd_step(p, zero, 0.5, Direction::ascend);
  CHECK(p == std::vector<double>{1.0, -3.0});
  CHECK_THROWS_AS((sgd_step(p, g, 0.1, Direction::ascend)), PreconditionError);
  CHECK_THROWS_AS((sgd_step(p, zero, 0.0, Direction::ascend)), PreconditionError);
}

TEST_CASE("ascend then descend restores dyadic parameters exactly") {
  // Exact when every product and sum is representable: dyadic rationals with
  // few significant bits.
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p(8), g(8);
    for (auto& v : p) v = static_cast<double>(static_cast<int>(rng.uniform_index(2001)) - 1000) / 64.0;
    for (auto& v : g) v = static_cast<double>(static_cast<int>(rng.uniform_index(2001)) - 1000) / 32.0;
    const auto before = p;
    sgd_step(p, g, 0.125, Direction::ascend);
    sgd_step(p, g, 0.125, Direction::descend);
    CHECK(p == before);
  }
}

TEST_CASE("finite_diff_check") {
  SUBCASE("constant network") {
    Mlp net({DenseLayer(3, 2, Activation::identity)});
    CHECK(finite_diff_check(net, Tensor::vector({1, 2, 3}), 1e-5) <= 1e-9);
  }
  SUBCASE("epsilon must be positive and small") {
    Mlp net({DenseLayer(2, 1, Activation::identity)});
    CHECK_THROWS_AS((finite_diff_check(net, Tensor::vector({1, 2}), 0.0)), PreconditionError);
    CHECK_THROWS_AS((finite_diff_check(net, Tensor::vector({1, 2}), 0.1)), PreconditionError);
  }
  SUBCASE("random two-layer net") {
    Rng rng(5);
    Mlp net = random_mlp(rng, 6, 5, 2);
    CHECK(finite_diff_check(net, random_input(rng, 6), 1e-5) < 1e-4);
  }
}

TEST_CASE("gradient property over 100 random layer configurations") {
  Rng rng(2024);
  const Activation acts[] = {Activation::relu, Activation::sigmoid, Activation::identity};
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t in = 1 + rng.uniform_index(16);
    const std::size_t out = 1 + rng.uniform_index(16);
    auto l = DenseLayer::random(in, out, acts[rng.uniform_index(3)], rng);
    for (auto& b : l.bias().values()) b = rng.normal(0.0, 0.5);
    Mlp net({l});
    worst = std::max(worst, finite_diff_check(net, random_input(rng, in), 1e-6));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("input gradient matches central differences") {
  Rng rng(9);
  auto l = DenseLayer::random(5, 3, Activation::sigmoid, rng);
  const Tensor x = random_input(rng, 5);
  l.forward(x);
  const auto g = l.backward(Tensor({3}, 1.0));
  for (std::size_t i = 0; i < 5; ++i) {
    Tensor up = x, down = x;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    double fu = 0.0, fd = 0.0;
    const Tensor yu = l.forward(up);
    const Tensor yd = l.forward(down);
    for (double v : yu.values()) fu += v;
    for (double v : yd.values()) fd += v;
    CHECK(g.input[i] == doctest::Approx((fu - fd) / 2e-6).epsilon(1e-6));
  }
}

TEST_CASE("rng determinism and stream independence") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng s1 = Rng(42).split(1), s2 = Rng(42).split(2);
  int same = 0;
  for (int i = 0; i < 100; ++i) same += s1.next_u64() == s2.next_u64();
  CHECK(same == 0);
  Rng u(7);
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double z = u.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / 20000) < 0.03);
  CHECK(std::abs(sq / 20000 - 1.0) < 0.05);
  const auto pick = sample_without_replacement(10, 10, u);
  std::vector<bool> seen(10, false);
  for (auto i : pick) seen[i] = true;
  CHECK(std::all_of(seen.begin(), seen.end(), [](bool v) { return v; }));
  CHECK_THROWS_AS((sample_without_replacement(3, 4, u)), PreconditionError);
}

TEST_CASE("probability clamp") {
  CHECK(clamp_probability(0.0) == kProbFloor);
  CHECK(clamp_probability(1.0) == 1.0 - kProbFloor);
  CHECK(clamp_probability(0.3) == 0.3);
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(std::isfinite(sigmoid(-1000.0)));
}
