#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "flashpoint/engine.hpp"
#include "flashpoint/gauge.hpp"
#include "flashpoint/opcore.hpp"
#include "flashpoint/povm.hpp"
#include "flashpoint/reconstruct.hpp"
#include "flashpoint/rgrwf/ck_lattice.hpp"
#include "flashpoint/rgrwf/process.hpp"
#include "flashpoint/stats.hpp"

namespace py = pybind11;
using namespace flashpoint;

namespace {

History history_from_tuples(const std::vector<std::tuple<int, double, int>>& flashes) {
  History f;
  for (auto& [q, t, label] : flashes) f.push_back(FlashRecord::flash(q, t, label));
  return f;
}

Tier tier_from_name(const std::string& name) {
  if (name == "simple") return Tier::Simple;
  if (name == "labeled") return Tier::Labeled;
  if (name == "variable-rate") return Tier::VariableRate;
  if (name == "time-dependent") return Tier::TimeDependent;
  if (name == "past-dependent") return Tier::PastDependent;
  throw std::invalid_argument("unknown tier: " + name);
}

}  // namespace

PYBIND11_MODULE(_flashpoint, m) {
  m.doc() = "GRW-type flash process simulator: operator core, samplers, checks";

  // Operator core.
  m.def("positive_sqrt", [](const Matrix& a) { return positive_sqrt(a); });
  m.def("polar_unitary", [](const Matrix& t) { return polar_unitary(t); });
  m.def("matrix_exp", [](const Matrix& a, double s) { return matrix_exp(a, s); }, py::arg("a"),
        py::arg("s") = 1.0);
  m.def("weak_integral",
        [](const std::vector<Matrix>& ops, const std::vector<double>& weights) {
          WeightedFamily fam;
          for (const auto& op : ops) fam.members.emplace_back(op, OpTag::General);
          fam.weights = weights;
          return weak_integral(fam).mat;
        });

  py::class_<GrwfModel>(m, "GrwfModel")
      .def_property_readonly("hilbert_dim", [](const GrwfModel& mod) { return mod.hilbert_dim; })
      .def_property_readonly("n_cells",
                             [](const GrwfModel& mod) { return mod.space.n_cells(); })
      .def("collapse_op",
           [](const GrwfModel& mod, const std::vector<std::tuple<int, double, int>>& f, int q,
              double t, int label) { return mod.collapse_at(history_from_tuples(f), q, t, label); })
      .def("total_rate", [](const GrwfModel& mod, double t) { return mod.total_rate({}, t); });

  m.def(
      "gaussian_model",
      [](int n_q, double x_min, double x_max, double lambda, double sigma, int n_particles,
         bool identical, double hopping) {
        ConfigSpace space(n_q, x_min, x_max, identical ? 1 : n_particles);
        Matrix h = lattice_hopping_hamiltonian(space, n_particles, hopping);
        return make_gaussian_model(space, lambda, sigma, n_particles,
                                   identical ? ParticleStatistics::Identical
                                             : ParticleStatistics::Distinguishable,
                                   h);
      },
      py::arg("n_q"), py::arg("x_min"), py::arg("x_max"), py::arg("lambda_rate"),
      py::arg("sigma"), py::arg("n_particles") = 1, py::arg("identical") = true,
      py::arg("hopping") = 0.0);
  m.def(
      "constant_model",
      [](int n_q, double x_min, double x_max, int labels, const std::vector<Matrix>& collapse,
         const Matrix& hamiltonian, const std::string& tier) {
        ConfigSpace space(n_q, x_min, x_max, labels);
        return make_constant_model(space, collapse, hamiltonian, tier_from_name(tier));
      },
      py::arg("n_q"), py::arg("x_min"), py::arg("x_max"), py::arg("labels"),
      py::arg("collapse"), py::arg("hamiltonian"), py::arg("tier") = "variable-rate");
  m.def(
      "fock_model",
      [](int n_q, double x_min, double x_max, int n_max, double lambda, double sigma,
         double hopping, double pair_coupling) {
        ConfigSpace space(n_q, x_min, x_max, 1);
        return make_fock_truncated_model(space, n_max, lambda, sigma, hopping, pair_coupling);
      },
      py::arg("n_q"), py::arg("x_min"), py::arg("x_max"), py::arg("n_max"),
      py::arg("lambda_rate"), py::arg("sigma"), py::arg("hopping") = 0.0,
      py::arg("pair_coupling") = 0.0);
  m.def(
      "random_model",
      [](const std::string& tier, int dim, int n_q, int labels, uint64_t seed, double lambda) {
        ConfigSpace space(n_q, -1.0, 1.0, labels);
        Rng rng(seed);
        RandomModelOptions opt;
        opt.lambda = lambda;
        return random_model(tier_from_name(tier), dim, space, rng, opt);
      },
      py::arg("tier"), py::arg("dim"), py::arg("n_q") = 2, py::arg("labels") = 1,
      py::arg("seed") = 1, py::arg("lambda_rate") = 1.0);

  m.def("history_density",
        [](const GrwfModel& mod, const std::vector<std::tuple<int, double, int>>& f, double t0) {
          Matrix l = ln_chain(mod, history_from_tuples(f), t0);
          return Matrix(l.adjoint() * l);
        });
  m.def("survival",
        [](const GrwfModel& mod, const std::vector<std::tuple<int, double, int>>& f, double t0,
           const Vector& psi, double t) { return survival(mod, history_from_tuples(f), t0, psi, t); });
  m.def("stop_probability",
        [](const GrwfModel& mod, const std::vector<std::tuple<int, double, int>>& f, double t0,
           const Vector& psi) { return stop_probability(mod, history_from_tuples(f), t0, psi); });

  m.def(
      "simulate",
      [](const GrwfModel& mod, const Vector& psi0, double t0, double t_max, int trajectories,
         uint64_t seed, int threads) {
        StopRule stop;
        stop.t_max = t_max;
        auto batch = run_batch(mod, psi0, t0, stop, trajectories, seed, threads);
        std::vector<std::vector<std::tuple<int, double, int, bool>>> out;
        for (const auto& traj : batch) {
          std::vector<std::tuple<int, double, int, bool>> flashes;
          for (const auto& z : traj.flashes)
            flashes.emplace_back(z.q, z.t, z.label, z.cemetery);
          out.push_back(std::move(flashes));
        }
        return out;
      },
      py::arg("model"), py::arg("psi0"), py::arg("t0"), py::arg("t_max"),
      py::arg("trajectories"), py::arg("seed"), py::arg("threads") = 0);

  m.def(
      "check_normalization",
      [](const GrwfModel& mod, int n, double t0, int level) {
        QuadratureSpec quad;
        quad.level = level;
        return check_normalization(mod, n, t0, quad).deviation;
      },
      py::arg("model"), py::arg("n") = 2, py::arg("t0") = 0.0, py::arg("level") = 3);

  m.def(
      "reconstruct_roundtrip_dev",
      [](const GrwfModel& mod, double t0, int histories, uint64_t seed) {
        DensityFamily fam = densities_from_model(mod, t0, 3);
        auto rec_s = reconstruct_sqrt_plus(fam);
        auto rec_h = reconstruct_heisenberg_plus(fam);
        Rng rng(seed);
        double dev_s = 0.0, dev_h = 0.0;
        for (int k = 0; k < histories; ++k) {
          History f;
          double t = t0;
          for (int i = 0; i <= k % 2; ++i) {
            t += 0.15 + 0.3 * rng.uniform();
            f.push_back(FlashRecord::flash(static_cast<int>(rng.uniform() * mod.space.n_q()), t,
                                           0));
          }
          Matrix l = ln_chain(mod, f, t0);
          Matrix e = l.adjoint() * l;
          Matrix ls = ln_chain(rec_s.model, f, t0);
          Matrix lh = ln_chain(rec_h.model, f, t0);
          dev_s = std::max(dev_s, ((ls.adjoint() * ls) - e).cwiseAbs().maxCoeff());
          dev_h = std::max(dev_h, ((lh.adjoint() * lh) - e).cwiseAbs().maxCoeff());
        }
        return py::make_tuple(dev_s, dev_h);
      },
      py::arg("model"), py::arg("t0") = 0.0, py::arg("histories") = 4, py::arg("seed") = 5);

  // Relativistic pieces.
  m.def("tdist", [](double yt, double yx, double xt, double xx) -> py::object {
    auto d = rgrwf::tdist({yt, yx}, {xt, xx});
    if (!d) return py::none();
    return py::float_(*d);
  });
  m.def(
      "kk_normalization",
      [](double mass, double lambda, double width, double x_half, int n_x, double dt,
         double s_max, int shells, double packet_center, double packet_width,
         double packet_momentum) {
        rgrwf::RgrwfModel mod;
        mod.lambda = lambda;
        mod.profile.width = width;
        mod.lattice.mass = mass;
        mod.lattice.x_min = -x_half;
        mod.lattice.x_max = x_half;
        mod.lattice.n_x = n_x;
        mod.lattice.dt = dt;
        rgrwf::DiracLattice lat(mod.lattice);
        auto psi = lat.gaussian_packet(0.0, packet_center, packet_width, packet_momentum);
        auto rep = rgrwf::check_kk_normalization(mod, {0.0, packet_center}, psi, s_max, shells);
        py::dict out;
        out["value"] = rep.value;
        out["target"] = rep.target;
        out["deviation"] = rep.deviation;
        out["max_edge_mass"] = rep.max_edge_mass;
        return out;
      },
      py::arg("mass") = 1.0, py::arg("lambda_rate") = 1.0, py::arg("width") = 1.0,
      py::arg("x_half") = 16.0, py::arg("n_x") = 160, py::arg("dt") = 0.08,
      py::arg("s_max") = 3.0, py::arg("shells") = 96, py::arg("packet_center") = 0.0,
      py::arg("packet_width") = 1.0, py::arg("packet_momentum") = 0.2);
  m.def(
      "sample_rgrwf",
      [](double mass, double lambda, double width, double x_half, int n_x, double dt,
         double s_max, int shells, const std::vector<std::pair<double, double>>& seeds,
         const std::vector<std::tuple<double, double, double>>& packets, int n_per_label,
         uint64_t seed) {
        rgrwf::RgrwfModel mod;
        mod.lambda = lambda;
        mod.profile.width = width;
        mod.n_labels = static_cast<int>(seeds.size());
        mod.lattice.mass = mass;
        mod.lattice.x_min = -x_half;
        mod.lattice.x_max = x_half;
        mod.lattice.n_x = n_x;
        mod.lattice.dt = dt;
        mod.s_max = s_max;
        mod.n_shells = shells;
        rgrwf::DiracLattice lat(mod.lattice);
        std::vector<rgrwf::SpacetimePoint> sp;
        for (auto& [t, x] : seeds) sp.push_back({t, x});
        std::vector<rgrwf::SliceState> factors;
        for (auto& [center, w, k] : packets)
          factors.push_back(lat.gaussian_packet(0.0, center, w, k));
        Rng rng(seed);
        auto res = rgrwf::sample_rgrwf(mod, sp, factors, n_per_label, rng);
        std::vector<std::vector<std::tuple<double, double, double>>> out;
        for (const auto& chain : res.per_label) {
          std::vector<std::tuple<double, double, double>> flashes;
          for (const auto& fl : chain) flashes.emplace_back(fl.x.t, fl.x.x, fl.tau_from_prev);
          out.push_back(std::move(flashes));
        }
        return out;
      },
      py::arg("mass"), py::arg("lambda_rate"), py::arg("width"), py::arg("x_half"),
      py::arg("n_x"), py::arg("dt"), py::arg("s_max"), py::arg("shells"), py::arg("seeds"),
      py::arg("packets"), py::arg("n_per_label"), py::arg("seed"));

  m.def(
      "ck_simulate",
      [](int t_max, uint64_t seed, bool right_first) {
        Rng rng(seed);
        return rgrwf::ck_lattice_simulate(t_max, rng, right_first).rows;
      },
      py::arg("t_max"), py::arg("seed"), py::arg("right_first") = false);
  m.def("ck_triples_ok", [](const std::vector<std::vector<int>>& rows) {
    rgrwf::CkLattice lat;
    lat.rows = rows;
    return rgrwf::ck_triples_ok(lat);
  });

  m.def("ks_test_exponential", [](std::vector<double> xs, double rate) {
    auto res = stats::ks_test_exponential(std::move(xs), rate);
    return py::make_tuple(res.statistic, res.p_value);
  });
}
