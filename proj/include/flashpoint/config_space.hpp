#pragma once

#include <stdexcept>
#include <vector>

namespace flashpoint {

// Discretized configuration space: a uniform 1D grid of positions times a
// finite label set, with Lebesgue cell weight dq.
struct ConfigSpace {
  std::vector<double> grid;  // positions, ascending
  double dq = 1.0;           // uniform cell weight
  int n_labels = 1;

  ConfigSpace() = default;
  ConfigSpace(int n_q, double x_min, double x_max, int labels) : n_labels(labels) {
    if (n_q < 1 || labels < 1 || !(x_max > x_min))
      throw std::invalid_argument("ConfigSpace: need n_q >= 1, labels >= 1, x_max > x_min");
    dq = (x_max - x_min) / n_q;
    grid.resize(n_q);
    for (int i = 0; i < n_q; ++i) grid[i] = x_min + (i + 0.5) * dq;  // cell centers
  }

  int n_q() const { return static_cast<int>(grid.size()); }
  int n_cells() const { return n_q() * n_labels; }
  double total_measure() const { return n_q() * dq * n_labels; }
};

// One flash z = (q, t, label), or the absorbing cemetery mark.
struct FlashRecord {
  int q = -1;
  double t = 0.0;
  int label = 0;
  bool cemetery = false;

  static FlashRecord flash(int q, double t, int label = 0) { return {q, t, label, false}; }
  static FlashRecord cemetery_mark(double t = 0.0) { return {-1, t, -1, true}; }
};

using History = std::vector<FlashRecord>;

inline bool time_ordered_strict(const History& f, double t0) {
  double prev = t0;
  for (const auto& z : f) {
    if (z.cemetery) continue;
    if (!(z.t > prev)) return false;
    prev = z.t;
  }
  return true;
}

inline double last_flash_time(const History& f, double t0) {
  for (auto it = f.rbegin(); it != f.rend(); ++it)
    if (!it->cemetery) return it->t;
  return t0;
}

inline bool has_cemetery(const History& f) {
  for (const auto& z : f)
    if (z.cemetery) return true;
  return false;
}

}  // namespace flashpoint
