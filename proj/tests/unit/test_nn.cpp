#include <cmath>
#include <vector>

#include "doctest.h"
#include "qrlforge/error.hpp"
#include "qrlforge/nn.hpp"

using namespace qrlforge;
using namespace qrlforge::nn;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("forward examples") {
  DenseNet lin({3, 3});
  auto w = lin.weights(0);
  for (std::size_t i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
  const std::vector<double> x{0.3, -1.2, 2.0};
  CHECK(lin.forward(x) == x);

  DenseNet z({2, 4, 2});
  z.biases(1)[0] = 0.5;
  z.biases(1)[1] = -0.25;
  const auto out = z.forward(std::vector<double>{7, 8});
  CHECK(out == std::vector<double>{0.5, -0.25});

  CHECK_THROWS_AS(z.forward(std::vector<double>{1}), ArgumentError);
  CHECK_THROWS_AS(DenseNet({3}), ArgumentError);
  CHECK(DenseNet({4, 8, 2}).parameter_count() == 4 * 8 + 8 + 8 * 2 + 2);
}

TEST_CASE("backward examples") {
  Rng rng(1);
  DenseNet net({4, 8, 2});
  net.init_uniform(rng);
  const auto x = random_vec(4, rng);
  const auto zero = net.backward(x, std::vector<double>{0, 0});
  for (double g : zero.params) CHECK(g == 0.0);
  for (double g : zero.input) CHECK(g == 0.0);

  const std::vector<double> x3(x.begin(), x.begin() + 3);
  DenseNet lin({3, 2});
  lin.init_uniform(rng);
  const std::vector<double> g{0.5, -2.0};
  const auto grads = lin.backward(x3, g);
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t i = 0; i < 3; ++i) CHECK(grads.params[o * 3 + i] == doctest::Approx(g[o] * x3[i]));
  CHECK(grads.params[6] == g[0]);
  CHECK(grads.params[7] == g[1]);
  CHECK_THROWS_AS(lin.backward(x3, std::vector<double>{1}), ArgumentError);
}

TEST_CASE("random nets: analytic gradients match central differences") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> sizes{1 + rng.below(16)};
    const auto depth = 1 + rng.below(3);
    for (std::uint64_t l = 0; l < depth; ++l) sizes.push_back(1 + rng.below(16));
    DenseNet net(sizes);
    net.init_uniform(rng);
    const auto x = random_vec(sizes.front(), rng);
    const auto g = random_vec(sizes.back(), rng);
    const auto grads = net.backward(x, g);
    const double h = 1e-5;

    auto check = [&](double analytic, double numeric) {
      const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
      CHECK(std::abs(analytic - numeric) / scale < 1e-4);
    };
    auto p = net.parameters();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double orig = p[i];
      p[i] = orig + h;
      const double fp = dot(net.forward(x), g);
      p[i] = orig - h;
      const double fm = dot(net.forward(x), g);
      p[i] = orig;
      check(grads.params[i], (fp - fm) / (2 * h));
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      check(grads.input[i], (dot(net.forward(xp), g) - dot(net.forward(xm), g)) / (2 * h));
    }
  }
}

TEST_CASE("external parameter vector") {
  Rng rng(3);
  DenseNet net({3, 5, 2});
  net.init_uniform(rng);
  const auto x = random_vec(3, rng);
  std::vector<double> other(net.parameter_count());
  for (auto& v : other) v = rng.uniform(-1, 1);
  DenseNet copy = net;
  std::copy(other.begin(), other.end(), copy.parameters().begin());

  DenseNet::Tape tape;
  net.forward(other, x, tape);
  const auto expect = copy.forward(x);
  for (std::size_t i = 0; i < 2; ++i) CHECK(tape.output()[i] == doctest::Approx(expect[i]));

  std::vector<double> g1(net.parameter_count(), 0.0);
  const std::vector<double> og{1.0, -0.5};
  net.backward(other, tape, og, g1);
  const auto g2 = copy.backward(x, og).params;
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == doctest::Approx(g2[i]));

  std::vector<double> wrong(3);
  CHECK_THROWS_AS(net.forward(wrong, x, tape), ArgumentError);
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    AdamState s(3, 0.1);
    std::vector<double> p{1, 2, 3}, g(3, 0.0);
    adam_step(s, p, g);
    CHECK(p == std::vector<double>{1, 2, 3});
    CHECK(s.step == 1);
  }
  SUBCASE("first step moves by the learning rate") {
    AdamState s(1, 0.1);
    std::vector<double> p{0.0}, g{1.0};
    adam_step(s, p, g);
    CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-6));
  }
  SUBCASE("quadratic descent is monotone") {
    // Scalar oracle: reimplemented Adam on x^2.
    AdamState s(1, 0.1);
    std::vector<double> p{1.0};
    double m = 0, v = 0, x = 1.0;
    double prev = 1.0;
    for (int t = 1; t <= 2; ++t) {
      const double g = 2 * x;
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      x -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
      std::vector<double> grad{2 * p[0]};
      adam_step(s, p, grad);
      CHECK(p[0] == doctest::Approx(x));
      CHECK(p[0] * p[0] < prev);
      prev = p[0] * p[0];
    }
  }
  SUBCASE("per-element learning rates and shape checks") {
    AdamState s(std::vector<double>{0.1, 0.01});
    std::vector<double> p{0, 0}, g{1, 1};
    adam_step(s, p, g);
    CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(-0.01).epsilon(1e-6));
    std::vector<double> short_g{1};
    CHECK_THROWS_AS(adam_step(s, p, short_g), ArgumentError);
  }
  SUBCASE("deterministic trajectories") {
    Rng r1(5), r2(5);
    DenseNet a({2, 4, 1}), b({2, 4, 1});
    a.init_uniform(r1);
    b.init_uniform(r2);
    AdamState sa(a.parameter_count(), 0.01), sb(b.parameter_count(), 0.01);
    for (int t = 0; t < 50; ++t) {
      const std::vector<double> x{std::sin(t), std::cos(t)};
      auto ga = a.backward(x, std::vector<double>{1.0}).params;
      auto gb = b.backward(x, std::vector<double>{1.0}).params;
      adam_step(sa, a.parameters(), ga);
      adam_step(sb, b.parameters(), gb);
    }
    CHECK(std::vector<double>(a.parameters().begin(), a.parameters().end()) ==
          std::vector<double>(b.parameters().begin(), b.parameters().end()));
  }
}

TEST_CASE("gradient clipping") {
  std::vector<double> g{3, 4};
  CHECK(clip_grad_norm(g, 1.0) == doctest::Approx(5.0));
  CHECK(g[0] == doctest::Approx(0.6));
  CHECK(g[1] == doctest::Approx(0.8));
  std::vector<double> small{0.1, 0.1};
  clip_grad_norm(small, 1.0);
  CHECK(small[0] == 0.1);
}
