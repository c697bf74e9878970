#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

namespace flashpoint::rgrwf {

// Event in 1+1 Minkowski space-time, signature (+,-).
struct SpacetimePoint {
  double t = 0.0;
  double x = 0.0;
};

// Timelike distance sqrt((y-x).(y-x)) when y lies in the causal future of x;
// zero exactly on the light cone, nullopt otherwise.
inline std::optional<double> tdist(const SpacetimePoint& y, const SpacetimePoint& x) {
  double dt = y.t - x.t;
  double dx = y.x - x.x;
  if (dt < 0.0) return std::nullopt;
  double q = dt * dt - dx * dx;
  if (q < 0.0) return std::nullopt;
  return std::sqrt(q);
}

inline bool in_causal_future(const SpacetimePoint& y, const SpacetimePoint& x) {
  return tdist(y, x).has_value();
}

// Future hyperboloid of constant timelike distance s from the base point,
// discretized over a window of coordinate offsets u = y^1 - base^1 aligned
// with a spatial lattice. The induced line measure has coordinate density
// 1/sqrt(1 + u^2/s^2); arc length from the apex is s*asinh(u/s).
struct Hyperboloid {
  SpacetimePoint base;
  double s = 1.0;
  double u0 = 0.0;  // offset of the first grid point
  double du = 0.1;
  int n = 0;

  Hyperboloid() = default;
  Hyperboloid(SpacetimePoint b, double dist, double u_first, double spacing, int count)
      : base(b), s(dist), u0(u_first), du(spacing), n(count) {
    if (!(s > 0.0)) throw std::invalid_argument("Hyperboloid: s must be positive");
  }

  double u(int j) const { return u0 + j * du; }
  double time_at(double uu) const { return base.t + std::sqrt(s * s + uu * uu); }
  SpacetimePoint point(int j) const { return {time_at(u(j)), base.x + u(j)}; }
  double measure_weight(int j) const {
    double uu = u(j);
    return du / std::sqrt(1.0 + uu * uu / (s * s));
  }
  double arc(double uu) const { return s * std::asinh(uu / s); }
  // Spacelike distance along the surface between two grid points.
  double sdist(int j1, int j2) const { return std::abs(arc(u(j2)) - arc(u(j1))); }
  // Future-pointing unit normal at grid point j: (y - base)/s.
  void normal(int j, double& n_t, double& n_x) const {
    double uu = u(j);
    n_t = std::sqrt(s * s + uu * uu) / s;
    n_x = uu / s;
  }
};

}  // namespace flashpoint::rgrwf
