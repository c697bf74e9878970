#include "doctest.h"
#include "flashpoint/rgrwf/geometry.hpp"
#include "flashpoint/rng.hpp"

using namespace flashpoint::rgrwf;

TEST_CASE("tdist: Minkowski 3-4-5 triple, coincident points, spacelike pairs") {
  SpacetimePoint x{0.0, 0.0};
  CHECK(*tdist({5.0, 3.0}, x) == doctest::Approx(4.0));
  CHECK(*tdist(x, x) == 0.0);
  CHECK(!tdist({1.0, 2.0}, x).has_value());
  CHECK(!tdist({-1.0, 0.0}, x).has_value());  // past
  // Light cone boundary: tdist = 0 exactly.
  CHECK(*tdist({2.0, 2.0}, x) == 0.0);
}

TEST_CASE("reverse triangle behavior on straight chords") {
  flashpoint::Rng rng(501);
  for (int rep = 0; rep < 200; ++rep) {
    SpacetimePoint x{0.0, 0.0};
    // Random future point and a point on the straight segment between.
    double dt = 1.0 + 3.0 * rng.uniform();
    double dx = (2.0 * rng.uniform() - 1.0) * dt * 0.95;
    SpacetimePoint z{dt, dx};
    double a = rng.uniform();
    SpacetimePoint y{a * dt, a * dx};
    double lhs = *tdist(z, x);
    double rhs = *tdist(z, y) + *tdist(y, x);
    CHECK(lhs >= rhs - 1e-9);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));  // chords are geodesics
  }
}

TEST_CASE("hyperboloid points sit at constant timelike distance") {
  SpacetimePoint base{0.3, -0.7};
  Hyperboloid h(base, 1.7, -5.0, 0.05, 200);
  for (int j = 0; j < h.n; ++j) {
    auto d = tdist(h.point(j), base);
    REQUIRE(d.has_value());
    CHECK(std::abs(*d - 1.7) < 1e-12);
  }
}

TEST_CASE("hyperboloid measure weights match the 1+1 coordinate density") {
  Hyperboloid h({0, 0}, 2.0, -1.0, 0.5, 5);
  for (int j = 0; j < h.n; ++j) {
    double u = h.u(j);
    CHECK(h.measure_weight(j) ==
          doctest::Approx(0.5 / std::sqrt(1.0 + u * u / 4.0)).epsilon(1e-14));
  }
}

TEST_CASE("arc length equals the asinh closed form and integrates the measure") {
  Hyperboloid h({0, 0}, 1.3, 0.0, 1e-4, 20001);
  // Numerical arc length from apex to u = 2 by summing measure weights.
  double target_u = 2.0;
  double acc = 0.0;
  for (int j = 0; j < h.n && h.u(j) < target_u; ++j) acc += h.measure_weight(j);
  CHECK(acc == doctest::Approx(h.arc(target_u)).epsilon(1e-3));
  CHECK(h.arc(target_u) == doctest::Approx(1.3 * std::asinh(2.0 / 1.3)).epsilon(1e-14));
}

TEST_CASE("unit normals are future-pointing and normalized") {
  Hyperboloid h({0, 0}, 0.9, -3.0, 0.25, 25);
  for (int j = 0; j < h.n; ++j) {
    double nt, nx;
    h.normal(j, nt, nx);
    CHECK(nt > 0.0);
    CHECK(nt * nt - nx * nx == doctest::Approx(1.0).epsilon(1e-12));
  }
}
