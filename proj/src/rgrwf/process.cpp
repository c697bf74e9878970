#include "flashpoint/rgrwf/process.hpp"

#include <cmath>

#include "flashpoint/propagator.hpp"

namespace flashpoint::rgrwf {

double Profile::operator()(double u) const {
  u = std::abs(u);
  if (kind == Kind::Gaussian) return std::exp(-u * u / (2.0 * width * width));
  if (u >= width) return 0.0;
  double r = u / width;
  return std::exp(1.0 - 1.0 / (1.0 - r * r));
}

double Profile::half_integral() const {
  if (kind == Kind::Gaussian) return width * std::sqrt(M_PI / 2.0);
  double acc = 0.0;
  for (auto [u, w] : flashpoint::gauss_legendre(64, 0.0, width)) acc += w * (*this)(u);
  return acc;
}

std::vector<double> shell_grid(const RgrwfModel& model) {
  const int k = model.n_shells;
  std::vector<double> s(k);
  const double s_min = model.s_max * model.s_min_frac;
  const double ratio = std::pow(model.s_max / s_min, 1.0 / (k - 1));
  s[0] = s_min;
  for (int i = 1; i < k; ++i) s[i] = s[i - 1] * ratio;
  s[k - 1] = model.s_max;
  return s;
}

Hyperboloid surface_at(const DiracLattice& lat, const SpacetimePoint& base, double s) {
  return Hyperboloid(base, s, lat.x(0) - base.x, lat.dx(), lat.n_x());
}

std::vector<double> surface_normalizers(const Hyperboloid& surf, const Profile& ell) {
  // N(y) = 1 / sum_x dmu_x l(sdist(x, y)); precompute arc lengths once.
  std::vector<double> arc(surf.n), w(surf.n);
  for (int j = 0; j < surf.n; ++j) {
    arc[j] = surf.arc(surf.u(j));
    w[j] = surf.measure_weight(j);
  }
  std::vector<double> out(surf.n);
  for (int y = 0; y < surf.n; ++y) {
    double z = 0.0;
    for (int x = 0; x < surf.n; ++x) z += w[x] * ell(arc[x] - arc[y]);
    out[y] = 1.0 / z;
  }
  return out;
}

std::vector<double> lambda_sigma_weights(const Hyperboloid& surf, int x_idx, double lambda,
                                         const Profile& ell,
                                         const std::vector<double>& normalizers) {
  std::vector<double> out(surf.n);
  for (int y = 0; y < surf.n; ++y)
    out[y] = lambda * normalizers[y] * ell(surf.sdist(x_idx, y));
  return out;
}

namespace {

// Work state shared by product and tensor modes: a block of Dirac solutions
// on one lattice, all columns stepped together.
struct BlockState {
  double t = 0.0;
  Eigen::MatrixXcd v;  // (2 n_x) x R
};

double block_mass(const DiracLattice& lat, const BlockState& b) {
  return lat.dx() * b.v.squaredNorm();
}

double block_edge_mass(const DiracLattice& lat, const BlockState& b, double fraction = 0.05) {
  const int n = lat.n_x();
  int margin = std::max(1, static_cast<int>(n * fraction));
  double acc = 0.0;
  for (int j = 0; j < margin; ++j) {
    acc += b.v.middleRows(2 * j, 2).squaredNorm();
    acc += b.v.middleRows(2 * (n - 1 - j), 2).squaredNorm();
  }
  return acc * lat.dx();
}

// Surface point density summed over block columns, with the h weight.
// Marches never exceed this span: beyond it the periodic wrap could reach
// interior columns and contaminate crossings.
double march_cap(const DiracLattice& lat) {
  return 0.9 * 0.5 * (lat.n_x() * lat.dx());
}

double block_point_density(const Hyperboloid& surf, int j, const Eigen::MatrixXcd& upper,
                           const Eigen::MatrixXcd& lower) {
  double n_t, n_x;
  surf.normal(j, n_t, n_x);
  double plain = upper.squaredNorm() + lower.squaredNorm();
  double cross = 2.0 * (upper.cwiseProduct(lower.conjugate())).sum().real();
  return n_t * plain - n_x * cross;
}

class ChainEngine {
 public:
  ChainEngine(const RgrwfModel& model, const DiracLattice& lat) : model_(model), lat_(lat) {}

  // Ensure the state sits at or below the given time (march down on the grid).
  static void lower_to(const DiracLattice& lat, BlockState& b, double t) {
    while (b.t > t + 1e-12) {
      lat.step_block(b.v, false);
      b.t -= lat.dt();
    }
  }

  // Norms of the state on every shell above the base point. Shells complete
  // in ascending order; when plateau_tol > 0 and three consecutive completed
  // norms agree within it, the remaining shells inherit the last value.
  std::vector<double> shell_norms(BlockState b, const SpacetimePoint& base,
                                  const std::vector<double>& shells, double plateau_tol,
                                  double* edge_mass_out) const {
    const int n = lat_.n_x();
    const int k_total = static_cast<int>(shells.size());
    std::vector<Hyperboloid> surfs;
    surfs.reserve(k_total);
    for (double s : shells) surfs.push_back(surface_at(lat_, base, s));

    double tau_min = surfs.front().time_at(surfs.front().u(0));
    for (int j = 0; j < n; ++j)
      tau_min = std::min(tau_min, surfs.front().time_at(surfs.front().u(j)));
    lower_to(lat_, b, tau_min);

    std::vector<int> next_shell(n, 0);
    std::vector<double> norms(k_total, 0.0);
    int completed = 0;
    double edge_mass = 0.0;
    const double edge0 = block_edge_mass(lat_, b);
    BlockState prev = b;
    const double mass_tol = model_.march_mass_tol * std::max(1.0, block_mass(lat_, b));
    while (completed < k_total) {
      BlockState next = prev;
      lat_.step_block(next.v, true);
      next.t += lat_.dt();
      for (int j = 0; j < n; ++j) {
        while (next_shell[j] < k_total) {
          int k = next_shell[j];
          double tau = surfs[k].time_at(surfs[k].u(j));
          if (tau > next.t + 1e-12) break;
          double theta = std::min(1.0, std::max(0.0, (tau - prev.t) / lat_.dt()));
          Eigen::MatrixXcd up = (1.0 - theta) * prev.v.row(2 * j) + theta * next.v.row(2 * j);
          Eigen::MatrixXcd lo =
              (1.0 - theta) * prev.v.row(2 * j + 1) + theta * next.v.row(2 * j + 1);
          norms[k] += surfs[k].measure_weight(j) * block_point_density(surfs[k], j, up, lo);
          ++next_shell[j];
        }
      }
      // A shell is complete once the columns that have not crossed it carry
      // negligible mass; completions advance in ascending order.
      while (completed < k_total) {
        double shell_pending = 0.0;
        for (int j = 0; j < n; ++j)
          if (next_shell[j] <= completed)
            shell_pending += lat_.dx() * next.v.middleRows(2 * j, 2).squaredNorm();
        if (shell_pending >= mass_tol) break;
        ++completed;
        if (plateau_tol > 0.0 && completed >= 3) {
          double a = norms[completed - 1], b2 = norms[completed - 2], c = norms[completed - 3];
          if (std::abs(a - b2) < plateau_tol && std::abs(b2 - c) < plateau_tol) {
            for (int k = completed; k < k_total; ++k) norms[k] = a;
            completed = k_total;
          }
        }
      }
      if (completed >= k_total) {
        edge_mass = std::max(edge_mass, block_edge_mass(lat_, next));
        break;
      }
      // Mass still to cross any pending shell; stop once it is negligible or
      // of the same order as the boundary mass (wrapped contributions would
      // then be as large as the remaining signal).
      double pending = 0.0;
      for (int j = 0; j < n; ++j)
        if (next_shell[j] < k_total) pending += lat_.dx() * next.v.middleRows(2 * j, 2).squaredNorm();
      double edge_now = block_edge_mass(lat_, next);
      edge_mass = std::max(edge_mass, edge_now);
      if (pending < std::max(mass_tol, std::max(0.0, edge_now - edge0))) break;
      if (next.t - b.t > march_cap(lat_)) break;
      prev = std::move(next);
    }
    if (edge_mass_out) *edge_mass_out = edge_mass;
    return norms;
  }

  // Per-column values of the state on one surface (2 x R blocks per column).
  void restrict_block(BlockState b, const Hyperboloid& surf, Eigen::MatrixXcd& upper,
                      Eigen::MatrixXcd& lower) const {
    const int n = lat_.n_x();
    const Index r = b.v.cols();
    upper = Eigen::MatrixXcd::Zero(n, r);
    lower = Eigen::MatrixXcd::Zero(n, r);
    double tau_min = 1e300;
    std::vector<double> tau(n);
    for (int j = 0; j < n; ++j) {
      tau[j] = surf.time_at(surf.u(j));
      tau_min = std::min(tau_min, tau[j]);
    }
    lower_to(lat_, b, tau_min);
    std::vector<bool> done(n, false);
    int remaining = n;
    BlockState prev = b;
    const double mass_tol = model_.march_mass_tol * std::max(1.0, block_mass(lat_, b));
    const double edge0 = block_edge_mass(lat_, b);
    while (remaining > 0) {
      BlockState next = prev;
      lat_.step_block(next.v, true);
      next.t += lat_.dt();
      for (int j = 0; j < n; ++j) {
        if (done[j] || tau[j] > next.t + 1e-12) continue;
        double theta = std::min(1.0, std::max(0.0, (tau[j] - prev.t) / lat_.dt()));
        upper.row(j) = (1.0 - theta) * prev.v.row(2 * j) + theta * next.v.row(2 * j);
        lower.row(j) = (1.0 - theta) * prev.v.row(2 * j + 1) + theta * next.v.row(2 * j + 1);
        done[j] = true;
        --remaining;
      }
      if (remaining > 0) {
        double pending = 0.0;
        for (int j = 0; j < n; ++j)
          if (!done[j]) pending += lat_.dx() * next.v.middleRows(2 * j, 2).squaredNorm();
        double edge_now = block_edge_mass(lat_, next);
        if (pending < std::max(mass_tol, std::max(0.0, edge_now - edge0))) break;
        if (next.t - b.t > march_cap(lat_)) break;
      }
      prev = std::move(next);
    }
  }

  // March through the surface applying per-column multiplication factors at
  // the crossings, then rebase to the grid slice at or below t_target.
  void collapse_and_rebase(BlockState& b, const Hyperboloid& surf,
                           const std::vector<double>& factors, double t_target,
                           double* edge_mass_out) const {
    const int n = lat_.n_x();
    std::vector<double> tau(n);
    double tau_min = 1e300;
    for (int j = 0; j < n; ++j) {
      tau[j] = surf.time_at(surf.u(j));
      tau_min = std::min(tau_min, tau[j]);
    }
    lower_to(lat_, b, tau_min);
    std::vector<bool> done(n, false);
    int remaining = n;
    double edge_mass = 0.0;
    const double mass_tol = model_.march_mass_tol * std::max(1.0, block_mass(lat_, b));
    const double edge0 = block_edge_mass(lat_, b);
    const double t_start = b.t;
    while (remaining > 0) {
      BlockState next = b;
      lat_.step_block(next.v, true);
      next.t += lat_.dt();
      for (int j = 0; j < n; ++j) {
        if (done[j] || tau[j] > next.t + 1e-12) continue;
        next.v.row(2 * j) *= factors[j];
        next.v.row(2 * j + 1) *= factors[j];
        done[j] = true;
        --remaining;
      }
      b = std::move(next);
      edge_mass = std::max(edge_mass, block_edge_mass(lat_, b));
      if (remaining > 0) {
        double pending = 0.0;
        for (int j = 0; j < n; ++j)
          if (!done[j]) pending += lat_.dx() * b.v.middleRows(2 * j, 2).squaredNorm();
        double edge_now = block_edge_mass(lat_, b);
        if (pending < std::max(mass_tol, std::max(0.0, edge_now - edge0)) ||
            b.t - t_start > march_cap(lat_)) {
          // Apply the factors on the remaining (near-massless) columns in place.
          for (int j = 0; j < n; ++j)
            if (!done[j]) {
              b.v.row(2 * j) *= factors[j];
              b.v.row(2 * j + 1) *= factors[j];
            }
          break;
        }
      }
    }
    lower_to(lat_, b, t_target);
    if (edge_mass_out) *edge_mass_out = std::max(*edge_mass_out, edge_mass);
  }

  // One flash of one chain. The block is the state of this label's factor
  // (columns = rest dimensions in tensor mode). Returns the flash and the
  // sampled timelike distance.
  RgrwfFlash sample_flash(BlockState& b, SpacetimePoint& base, int label, int k, Rng& rng,
                          RgrwfDiagnostics& diag) const {
    auto shells = shell_grid(model_);
    double edge = 0.0;
    std::vector<double> norms = shell_norms(b, base, shells, model_.plateau_tol, &edge);
    diag.max_edge_mass = std::max(diag.max_edge_mass, edge);

    const double lambda = model_.lambda;
    std::vector<double> mass(shells.size());
    double prev_s = 0.0, total = 0.0;
    for (size_t i = 0; i < shells.size(); ++i) {
      mass[i] = (std::exp(-lambda * prev_s) - std::exp(-lambda * shells[i])) * norms[i];
      total += mass[i];
      prev_s = shells[i];
    }
    diag.truncated_s_mass = std::max(diag.truncated_s_mass, std::abs(1.0 - total));
    double u = rng.uniform() * total;
    size_t seg = 0;
    double acc = 0.0;
    for (; seg + 1 < mass.size(); ++seg) {
      if (u < acc + mass[seg]) break;
      acc += mass[seg];
    }
    double s_lo = seg == 0 ? 0.0 : shells[seg - 1];
    double frac = (u - acc) / std::max(mass[seg], 1e-300);
    frac = std::min(1.0, std::max(0.0, frac));
    double s_star = -std::log(std::exp(-lambda * s_lo) -
                              frac * (std::exp(-lambda * s_lo) - std::exp(-lambda * shells[seg]))) /
                    lambda;
    s_star = std::min(std::max(s_star, s_lo * (1.0 + 1e-12) + 1e-12), shells[seg]);

    Hyperboloid surf = surface_at(lat_, base, s_star);
    Eigen::MatrixXcd upper, lower;
    restrict_block(b, surf, upper, lower);
    auto normalizers = surface_normalizers(surf, model_.profile);
    std::vector<double> arc(surf.n), wgt(surf.n), rho(surf.n);
    for (int j = 0; j < surf.n; ++j) {
      arc[j] = surf.arc(surf.u(j));
      wgt[j] = surf.measure_weight(j);
      rho[j] = block_point_density(surf, j, upper.row(j), lower.row(j));
    }
    std::vector<double> loc_weights(surf.n, 0.0);
    for (int j = 0; j < surf.n; ++j) {
      double r_j = 0.0;
      for (int y = 0; y < surf.n; ++y)
        r_j += wgt[y] * normalizers[y] * model_.profile(arc[j] - arc[y]) * rho[y];
      loc_weights[j] = lambda * r_j * wgt[j];
    }
    int j_star = rng.pick(loc_weights);
    if (j_star < 0) throw ZeroCollapseNorm("sample_rgrwf: zero surface density");

    std::vector<double> factors(surf.n);
    double g_max = 0.0;
    for (int y = 0; y < surf.n; ++y) {
      factors[y] = std::sqrt(lambda * normalizers[y] * model_.profile(arc[j_star] - arc[y]));
      g_max = std::max(g_max, factors[y]);
    }
    // The state is renormalized after the collapse, so the factor array can
    // be rescaled to max 1; bounded factors keep the crossing march stable
    // where the surface runs nearly parallel to the light cone.
    for (double& g : factors) g /= g_max;
    SpacetimePoint x_star = surf.point(j_star);
    double t_rebase = b.t;
    while (t_rebase + lat_.dt() <= x_star.t) t_rebase += lat_.dt();
    collapse_and_rebase(b, surf, factors, t_rebase, &diag.max_edge_mass);
    double nn = std::sqrt(lat_.dx()) * b.v.norm();
    if (nn < tol::collapse_norm) throw ZeroCollapseNorm("sample_rgrwf: collapsed state vanished");
    b.v /= b.v.norm();
    b.v /= std::sqrt(lat_.dx());

    base = x_star;
    RgrwfFlash fl;
    fl.label = label;
    fl.k = k;
    fl.x = x_star;
    fl.tau_from_prev = s_star;
    return fl;
  }

  const RgrwfModel& model_;
  const DiracLattice& lat_;
};

}  // namespace

SliceState apply_k_operator(const RgrwfModel& model, const DiracLattice& lat,
                            const SliceState& psi, const SpacetimePoint& x_prime,
                            const SpacetimePoint& x) {
  SliceState out = psi;
  auto s = tdist(x, x_prime);
  if (!s || *s <= 0.0) {
    out.v = Vector::Zero(psi.v.size());
    return out;
  }
  ChainEngine eng(model, lat);
  Hyperboloid surf = surface_at(lat, x_prime, *s);
  auto normalizers = surface_normalizers(surf, model.profile);
  int x_idx = lat.column_of(x.x);
  auto lam_w = lambda_sigma_weights(surf, x_idx, model.lambda, model.profile, normalizers);
  std::vector<double> factors(surf.n);
  double g_max = 0.0;
  for (int y = 0; y < surf.n; ++y) {
    factors[y] = std::sqrt(lam_w[y]);
    g_max = std::max(g_max, factors[y]);
  }
  for (double& g : factors) g /= g_max;
  BlockState b;
  b.t = psi.t;
  b.v = psi.v;
  double edge = 0.0;
  eng.collapse_and_rebase(b, surf, factors, psi.t, &edge);
  out.t = b.t;
  out.v = (g_max * std::exp(-model.lambda * *s / 2.0)) * b.v;
  return out;
}

KkReport check_kk_normalization(const RgrwfModel& model, const SpacetimePoint& x_prime,
                                const SliceState& psi, double s_max, int n_shells) {
  DiracLattice lat(model.lattice);
  ChainEngine eng(model, lat);
  RgrwfModel local = model;
  local.s_max = s_max;
  local.n_shells = n_shells;
  auto shells = shell_grid(local);
  BlockState b;
  b.t = psi.t;
  b.v = psi.v;
  KkReport rep;
  std::vector<double> norms = eng.shell_norms(b, x_prime, shells, 0.0, &rep.max_edge_mass);
  double prev_s = 0.0;
  for (size_t i = 0; i < shells.size(); ++i) {
    rep.value += (std::exp(-model.lambda * prev_s) - std::exp(-model.lambda * shells[i])) * norms[i];
    prev_s = shells[i];
  }
  rep.target = 1.0 - std::exp(-model.lambda * s_max);
  rep.deviation = std::abs(rep.value - rep.target);
  return rep;
}

RgrwfResult sample_rgrwf(const RgrwfModel& model, const std::vector<SpacetimePoint>& seeds,
                         const std::vector<SliceState>& initial_factors, int n_per_label,
                         Rng& rng) {
  if (static_cast<int>(seeds.size()) != model.n_labels ||
      initial_factors.size() != seeds.size())
    throw std::invalid_argument("sample_rgrwf: need one seed and one factor per label");
  DiracLattice lat(model.lattice);
  ChainEngine eng(model, lat);
  RgrwfResult out;
  out.per_label.resize(model.n_labels);
  std::vector<BlockState> states(model.n_labels);
  std::vector<SpacetimePoint> bases = seeds;
  for (int i = 0; i < model.n_labels; ++i) {
    states[i].t = initial_factors[i].t;
    states[i].v = initial_factors[i].v;
  }
  for (int k = 1; k <= n_per_label; ++k)
    for (int i = 0; i < model.n_labels; ++i)
      out.per_label[i].push_back(eng.sample_flash(states[i], bases[i], i, k, rng, out.diag));
  return out;
}

RgrwfResult sample_rgrwf_tensor(const RgrwfModel& model, const std::vector<SpacetimePoint>& seeds,
                                const Vector& tensor_state, double t0, int n_per_label,
                                Rng& rng) {
  if (static_cast<int>(seeds.size()) != model.n_labels)
    throw std::invalid_argument("sample_rgrwf_tensor: need one seed per label");
  DiracLattice lat(model.lattice);
  const Index d = 2 * lat.n_x();
  Index total = 1;
  for (int i = 0; i < model.n_labels; ++i) total *= d;
  if (total != tensor_state.size())
    throw std::invalid_argument("sample_rgrwf_tensor: state size != (2 n_x)^n_labels");
  if (total > (1 << 14))
    throw std::invalid_argument("sample_rgrwf_tensor: tensor dimension above the 2^14 cap");

  ChainEngine eng(model, lat);
  RgrwfResult out;
  out.per_label.resize(model.n_labels);
  Vector state = tensor_state;
  std::vector<SpacetimePoint> bases = seeds;
  // Per-label representation times (the factors live on different lines).
  std::vector<double> times(model.n_labels, t0);

  auto gather = [&](int label) -> Eigen::MatrixXcd {
    Index stride = 1;
    for (int j = model.n_labels - 1; j > label; --j) stride *= d;
    Index outer = total / (stride * d);
    Eigen::MatrixXcd m(d, total / d);
    for (Index a = 0; a < d; ++a) {
      Index col = 0;
      for (Index o = 0; o < outer; ++o)
        for (Index s = 0; s < stride; ++s) m(a, col++) = state(o * stride * d + a * stride + s);
    }
    return m;
  };
  auto scatter = [&](int label, const Eigen::MatrixXcd& m) {
    Index stride = 1;
    for (int j = model.n_labels - 1; j > label; --j) stride *= d;
    Index outer = total / (stride * d);
    for (Index a = 0; a < d; ++a) {
      Index col = 0;
      for (Index o = 0; o < outer; ++o)
        for (Index s = 0; s < stride; ++s) state(o * stride * d + a * stride + s) = m(a, col++);
    }
  };

  for (int k = 1; k <= n_per_label; ++k)
    for (int i = 0; i < model.n_labels; ++i) {
      BlockState b;
      b.t = times[i];
      b.v = gather(i);
      RgrwfFlash fl = eng.sample_flash(b, bases[i], i, k, rng, out.diag);
      times[i] = b.t;
      scatter(i, b.v);
      // sample_flash normalizes its block; the tensor norm equals the block
      // norm, so the full state stays normalized.
      out.per_label[i].push_back(fl);
    }
  return out;
}

}  // namespace flashpoint::rgrwf
