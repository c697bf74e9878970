#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "flashpoint/rng.hpp"

namespace flashpoint::rgrwf {

// Discrete-space-time toy field: row T carries T binary values; each point's
// two future neighbors satisfy phi(x) + phi(y) + phi(z) in {0, 2}, i.e.
// phi(z) = phi(x) XOR phi(y). One fair coin fixes one value per row; the law
// then determines the rest, from the left or from the right.
struct CkLattice {
  std::vector<std::vector<int>> rows;

  int t_max() const { return static_cast<int>(rows.size()); }

  // Pack into an integer (rows in order, left to right) for distribution tests.
  uint64_t encode() const {
    uint64_t code = 0;
    for (const auto& row : rows)
      for (int v : row) code = (code << 1) | static_cast<uint64_t>(v);
    return code;
  }
};

inline CkLattice ck_lattice_simulate(int t_max, Rng& rng, bool right_first = false) {
  if (t_max < 1) throw std::invalid_argument("ck_lattice_simulate: t_max >= 1");
  CkLattice lat;
  lat.rows.reserve(t_max);
  lat.rows.push_back({rng.uniform() < 0.5 ? 0 : 1});
  for (int t = 2; t <= t_max; ++t) {
    const auto& prev = lat.rows.back();
    std::vector<int> row(t);
    int coin = rng.uniform() < 0.5 ? 0 : 1;
    if (!right_first) {
      row[0] = coin;
      for (int i = 0; i + 1 < t; ++i) row[i + 1] = prev[i] ^ row[i];
    } else {
      row[t - 1] = coin;
      for (int i = t - 2; i >= 0; --i) row[i] = prev[i] ^ row[i + 1];
    }
    lat.rows.push_back(std::move(row));
  }
  return lat;
}

inline bool ck_triples_ok(const CkLattice& lat) {
  for (size_t t = 0; t + 1 < lat.rows.size(); ++t)
    for (size_t i = 0; i < lat.rows[t].size(); ++i) {
      int sum = lat.rows[t][i] + lat.rows[t + 1][i] + lat.rows[t + 1][i + 1];
      if (sum != 0 && sum != 2) return false;
    }
  return true;
}

// All valid configurations up to t_max (2^t_max of them), by enumerating the
// per-row coin sequences; the exhaustive oracle for order-invariance tests.
inline std::vector<uint64_t> ck_enumerate(int t_max) {
  std::vector<uint64_t> codes;
  int n_coins = t_max;
  for (int bits = 0; bits < (1 << n_coins); ++bits) {
    CkLattice lat;
    lat.rows.push_back({(bits >> 0) & 1});
    for (int t = 2; t <= t_max; ++t) {
      const auto& prev = lat.rows.back();
      std::vector<int> row(t);
      row[0] = (bits >> (t - 1)) & 1;
      for (int i = 0; i + 1 < t; ++i) row[i + 1] = prev[i] ^ row[i];
      lat.rows.push_back(std::move(row));
    }
    codes.push_back(lat.encode());
  }
  return codes;
}

}  // namespace flashpoint::rgrwf
