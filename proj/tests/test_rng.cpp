#include "doctest.h"

#include <cmath>

#include "divker/rng.hpp"

using namespace divker;

TEST_CASE("philox known-answer vector") {
  const auto out = philox4x32_10({0, 0, 0, 0}, {0, 0});
  CHECK(out[0] == 0x6627e8d5u);
  CHECK(out[1] == 0xe169c58du);
  CHECK(out[2] == 0xbc57ac4cu);
  CHECK(out[3] == 0x9b00dbd8u);
}

TEST_CASE("streams are pure functions of their address") {
  GaussianStream a(42, 7, 3), b(42, 7, 3);
  for (int i = 0; i < 9; ++i) CHECK(a.normal() == b.normal());
  GaussianStream c(42, 7, 4), d(42, 8, 3), e(43, 7, 3);
  GaussianStream ref(42, 7, 3);
  const double x = ref.normal();
  CHECK(c.normal() != x);
  CHECK(d.normal() != x);
  CHECK(e.normal() != x);
}

TEST_CASE("normals have unit moments") {
  double s = 0, ss = 0;
  const int n = 200000;
  for (int p = 0; p < n / 4; ++p) {
    GaussianStream g(1, p, 0);
    for (int k = 0; k < 4; ++k) {
      const double z = g.normal();
      s += z;
      ss += z * z;
    }
  }
  CHECK(std::abs(s / n) < 5.0 / std::sqrt(n));
  CHECK(std::abs(ss / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
}

TEST_CASE("uniforms stay inside the open interval") {
  GaussianStream g(5, 0, 0);
  for (int i = 0; i < 10000; ++i) {
    const double u = g.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}
