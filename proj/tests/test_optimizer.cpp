#include <cmath>
#include <limits>

#include "doctest.h"
#include "polypnet/errors.hpp"
#include "polypnet/optimizer.hpp"
#include "test_util.hpp"

using namespace polypnet;

TEST_CASE("adam config validation") {
  AdamConfig bad;
  bad.lr = 0.0;
  CHECK_THROWS_AS(Adam({}, bad), ValueError);
  bad = {};
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(Adam({}, bad), ValueError);
  bad = {};
  bad.beta2 = -0.1;
  CHECK_THROWS_AS(Adam({}, bad), ValueError);
  bad = {};
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(Adam({}, bad), ValueError);
}

TEST_CASE("zero gradients leave parameters fixed while the step advances") {
  Tensor p({3}, {1.0, -2.0, 0.5});
  Tensor g = Tensor::zeros({3});
  Adam adam({{"p", &p, &g}});
  for (int i = 0; i < 5; ++i) adam.step();
  CHECK(adam.step_count() == 5);
  CHECK(p[0] == 1.0);
  CHECK(p[1] == -2.0);
  CHECK(p[2] == 0.5);
}

TEST_CASE("first step matches the closed form") {
  // With constant g: m-hat = g, v-hat = g^2, update = lr*g/(|g|+eps).
  Tensor p({1}, {1.0});
  Tensor g({1}, {0.5});
  Adam adam({{"p", &p, &g}});
  adam.step();
  const double expected = 1.0 - 0.001 * 0.5 / (0.5 + 1e-8);
  CHECK(p[0] == doctest::Approx(expected).epsilon(1e-15));
  CHECK(p[0] == doctest::Approx(0.999).epsilon(1e-6));
}

TEST_CASE("first step magnitude never exceeds lr") {
  Rng rng(21);
  for (int it = 0; it < 100; ++it) {
    Tensor p = rng_uniform(rng, {8}, -2.0, 2.0);
    Tensor g = rng_uniform(rng, {8}, -5.0, 5.0);
    Tensor before = p;
    AdamConfig cfg;
    cfg.lr = 0.01;
    Adam adam({{"p", &p, &g}}, cfg);
    adam.step();
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(std::abs(p[i] - before[i]) <= cfg.lr + 1e-15);
    }
  }
}

TEST_CASE("gradient scaling leaves the first update's sign pattern unchanged") {
  Rng rng(33);
  for (int it = 0; it < 50; ++it) {
    Tensor g = rng_uniform(rng, {6}, -1.0, 1.0);
    Tensor gs = mul(g, 37.5);
    Tensor p1 = Tensor::zeros({6});
    Tensor p2 = Tensor::zeros({6});
    Adam a1({{"p", &p1, &g}});
    Adam a2({{"p", &p2, &gs}});
    a1.step();
    a2.step();
    for (std::size_t i = 0; i < 6; ++i) {
      const auto sign = [](double v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); };
      CHECK(sign(p1[i]) == sign(p2[i]));
    }
  }
}

TEST_CASE("adam drives the scalar quadratic (x-3)^2 to the minimum") {
  Tensor x({1}, {0.0});
  Tensor g = Tensor::zeros({1});
  AdamConfig cfg;
  cfg.lr = 0.05;
  Adam adam({{"x", &x, &g}}, cfg);
  std::size_t steps = 0;
  for (; steps < 2000; ++steps) {
    g[0] = 2.0 * (x[0] - 3.0);
    adam.step();
    if (std::abs(x[0] - 3.0) < 0.01) break;
  }
  CHECK(std::abs(x[0] - 3.0) < 0.01);
  CHECK(steps < 2000);
}

TEST_CASE("identical runs produce bit-identical trajectories") {
  const auto run = [] {
    Rng rng(1234);
    Tensor p = rng_uniform(rng, {10}, -1.0, 1.0);
    Tensor g = Tensor::zeros({10});
    Adam adam({{"p", &p, &g}});
    std::vector<double> trace;
    for (int step = 0; step < 100; ++step) {
      for (std::size_t i = 0; i < 10; ++i) {
        g[i] = 0.1 * p[i] + rng.uniform(-0.01, 0.01);
      }
      adam.step();
      for (std::size_t i = 0; i < 10; ++i) trace.push_back(p[i]);
    }
    return trace;
  };
  const auto a = run(), b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("non-finite gradients are rejected with the parameter named") {
  Tensor p({2}, {0.0, 0.0});
  Tensor g({2}, {0.0, 0.0});
  Adam adam({{"conv1.kernel", &p, &g}});
  g[1] = std::numeric_limits<double>::quiet_NaN();
  try {
    adam.step();
    FAIL("expected ValueError");
  } catch (const ValueError& e) {
    CHECK(std::string(e.what()).find("conv1.kernel") != std::string::npos);
  }
}

TEST_CASE("gradient shape drift is a shape error") {
  Tensor p({2}, {0.0, 0.0});
  Tensor g({2}, {0.0, 0.0});
  Adam adam({{"p", &p, &g}});
  g = Tensor::zeros({3});
  CHECK_THROWS_AS(adam.step(), ShapeError);
}
