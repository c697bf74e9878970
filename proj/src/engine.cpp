#include "flashpoint/engine.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include "flashpoint/opcore.hpp"

namespace flashpoint {

Vector collapse(const Vector& psi, const Matrix& c) {
  Vector v = c * psi;
  double n = v.norm();
  if (n <= tol::collapse_norm)
    throw ZeroCollapseNorm("collapse: ||C psi|| vanishes (sampler inconsistency)");
  return v / n;
}

Matrix ln_chain(const GrwfModel& model, const History& f, double t0) {
  const int dim = model.hilbert_dim;
  if (has_cemetery(f)) throw std::invalid_argument("ln_chain: history contains the cemetery");
  Matrix l = Matrix::Identity(dim, dim);
  double t_prev = t0;
  History prefix;
  prefix.reserve(f.size());
  for (const auto& z : f) {
    if (!(z.t > t_prev)) return Matrix::Zero(dim, dim);  // time-ordering indicator
    Matrix w = dyson_propagator(model, prefix, t_prev, z.t);
    Matrix c = model.collapse_at(prefix, z.q, z.t, z.label);
    l = c * (w * l);
    prefix.push_back(z);
    t_prev = z.t;
  }
  return l;
}

double survival(const GrwfModel& model, const History& f, double t0, const Vector& psi,
                double t) {
  double t_n = last_flash_time(f, t0);
  if (t < t_n) throw std::invalid_argument("survival: t below the branch time");
  BranchEvolver ev(model, f, t_n);
  return (ev.w(t_n, t) * psi).squaredNorm();
}

double stop_probability(const GrwfModel& model, const History& f, double t0, const Vector& psi) {
  double t_n = last_flash_time(f, t0);
  Matrix t_inf = lim_wstar_w(model, f, t_n);
  double p = (psi.adjoint() * t_inf * psi).real()(0, 0);
  return std::min(1.0, std::max(0.0, p));
}

namespace {

Vector evolve_const_h(const GrwfModel& model, const Vector& psi, double lambda, double dt) {
  // W = exp(-lambda dt / 2) exp(-i H dt) when Lambda(Q) = lambda I; the
  // scalar factor drops out after normalization, so apply the unitary only.
  if (model.h_eig) {
    const auto& es = *model.h_eig;
    Vector z = es.eigenvectors().adjoint() * psi;
    for (Index i = 0; i < z.size(); ++i)
      z(i) *= std::polar(1.0, -es.eigenvalues()(i) * dt);
    return es.eigenvectors() * z;
  }
  (void)lambda;
  return matrix_exp(-kImag * model.ham_at({}, 0.0), dt) * psi;
}

// Location weights over (label, q) cells: ||C(f,q,t,label) phi||^2 dq.
int pick_cell(const GrwfModel& model, const History& f, double t, const Vector& phi, Rng& rng,
              Matrix& c_out) {
  const int n_q = model.space.n_q();
  const int cells = model.space.n_cells();
  std::vector<double> weights(cells);
  for (int label = 0; label < model.space.n_labels; ++label)
    for (int q = 0; q < n_q; ++q)
      weights[static_cast<size_t>(label) * n_q + q] =
          (model.collapse_at(f, q, t, label) * phi).squaredNorm() * model.space.dq;
  int idx = rng.pick(weights);
  if (idx < 0) throw ZeroCollapseNorm("sample_next_flash: zero total rate at sampled time");
  c_out = model.collapse_at(f, idx % n_q, t, idx / n_q);
  return idx;
}

}  // namespace

NextFlash sample_next_flash(const GrwfModel& model, const History& f, double t0,
                            const Vector& psi, Rng& rng, std::optional<double> t_cap) {
  if (std::abs(psi.norm() - 1.0) > 1e-6)
    throw std::invalid_argument("sample_next_flash: psi must be normalized");
  const double t_n = last_flash_time(f, t0);
  const int n_q = model.space.n_q();

  // Poisson fast path: constant scalar total rate, survival is exp(-lambda dt).
  if (model.poisson_like() && !model.propagator_fn && *model.lambda_const > 1e-14) {
    const double lambda = *model.lambda_const;
    double dt = rng.exponential(lambda);
    if (t_cap && t_n + dt > *t_cap) {
      NextFlash out;
      out.kind = NextFlash::Kind::BeyondCap;
      return out;
    }
    double tt = t_n + dt;
    Vector phi = evolve_const_h(model, psi, lambda, dt);
    phi.normalize();
    Matrix c;
    int idx = pick_cell(model, f, tt, phi, rng, c);
    NextFlash out;
    out.kind = NextFlash::Kind::Flash;
    out.flash = FlashRecord::flash(idx % n_q, tt, idx / n_q);
    out.psi_after = collapse(phi, c);
    return out;
  }

  const double p_stop = stop_probability(model, f, t0, psi);
  const double u = rng.uniform();
  if (u <= p_stop) {
    NextFlash out;
    out.kind = NextFlash::Kind::Cemetery;
    out.flash = FlashRecord::cemetery_mark(t_n);
    return out;
  }

  // Inverse transform on the survival grid: march psi_k = W^{t_k} psi with
  // step h, locate the bracketing step of u, then interpolate linearly.
  BranchEvolver ev(model, f, t_n);
  double span = t_cap ? std::max(*t_cap - t_n, 1e-6) : 100.0 / ev.rate_scale();
  double h = std::min(0.01 / ev.rate_scale(), span / 1e4);
  Vector cur = psi;
  double s_prev = 1.0;
  double t_prev = t_n;
  const long hard_cap = 40000000L;
  for (long k = 1; k <= hard_cap; ++k) {
    double tk = t_n + k * h;
    Vector nxt;
    if (ev.autonomous()) {
      nxt = ev.uniform_step(h) * cur;
    } else {
      Matrix r = ev.generator(t_prev + 0.5 * h);
      nxt = matrix_exp(r, h) * cur;
    }
    double s_k = nxt.squaredNorm();
    if (s_k < u) {
      double theta = (s_prev - u) / std::max(s_prev - s_k, 1e-300);
      double tt = t_prev + theta * h;
      if (t_cap && tt > *t_cap) {
        NextFlash out;
        out.kind = NextFlash::Kind::BeyondCap;
        return out;
      }
      Vector phi;
      if (ev.autonomous()) {
        phi = matrix_exp(ev.generator(t_prev), theta * h) * cur;
      } else {
        phi = matrix_exp(ev.generator(t_prev + 0.5 * theta * h), theta * h) * cur;
      }
      phi.normalize();
      Matrix c;
      int idx = pick_cell(model, f, tt, phi, rng, c);
      NextFlash out;
      out.kind = NextFlash::Kind::Flash;
      out.flash = FlashRecord::flash(idx % n_q, tt, idx / n_q);
      out.psi_after = collapse(phi, c);
      return out;
    }
    if (t_cap && tk >= *t_cap) {
      NextFlash out;
      out.kind = NextFlash::Kind::BeyondCap;
      return out;
    }
    cur.swap(nxt);
    s_prev = s_k;
    t_prev = tk;
  }
  throw NonConvergence("sample_next_flash: survival bisection failed at the hard cap");
}

Trajectory simulate(const GrwfModel& model, const Vector& psi0, double t0, const StopRule& stop,
                    Rng& rng, uint64_t seed_for_record) {
  Trajectory traj;
  traj.seed = seed_for_record;
  traj.t0 = t0;
  traj.psi0 = psi0;
  Vector psi = psi0;
  traj.t_final = t0;
  while (true) {
    if (stop.max_flashes && static_cast<int>(traj.flashes.size()) >= *stop.max_flashes) break;
    NextFlash nf = sample_next_flash(model, traj.flashes, t0, psi, rng, stop.t_max);
    if (nf.kind == NextFlash::Kind::BeyondCap) {
      double t_n = last_flash_time(traj.flashes, t0);
      Vector v;
      if (model.poisson_like() && model.h_eig && !model.propagator_fn) {
        // Scalar decay factor drops after normalization; rotate by H only.
        v = evolve_const_h(model, psi, *model.lambda_const, *stop.t_max - t_n);
      } else {
        BranchEvolver ev(model, traj.flashes, t_n);
        v = ev.w(t_n, *stop.t_max) * psi;
      }
      double n = v.norm();
      psi = n > tol::collapse_norm ? Vector(v / n) : psi;
      traj.t_final = *stop.t_max;
      break;
    }
    if (nf.kind == NextFlash::Kind::Cemetery) {
      traj.flashes.push_back(nf.flash);
      traj.t_final = nf.flash.t;
      break;
    }
    traj.flashes.push_back(nf.flash);
    psi = nf.psi_after;
    traj.t_final = nf.flash.t;
  }
  traj.psi_final = psi;
  return traj;
}

int resolve_thread_count(int requested) {
  int n = requested;
  if (n <= 0) {
    if (const char* env = std::getenv("FLASHPOINT_THREADS")) n = std::atoi(env);
  }
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  return n;
}

std::vector<Trajectory> run_batch(const GrwfModel& model, const Vector& psi0, double t0,
                                  const StopRule& stop, int n_trajectories, uint64_t master_seed,
                                  int n_threads) {
  std::vector<Trajectory> out(n_trajectories);
  int threads = std::min(resolve_thread_count(n_threads), std::max(1, n_trajectories));
  auto worker = [&](int first, int stride) {
    for (int k = first; k < n_trajectories; k += stride) {
      Rng rng = Rng::stream(master_seed, static_cast<uint64_t>(k));
      out[k] = simulate(model, psi0, t0, stop, rng, master_seed ^ static_cast<uint64_t>(k));
    }
  };
  if (threads == 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker, i, threads);
    for (auto& th : pool) th.join();
  }
  return out;
}

}  // namespace flashpoint
