#include "flashpoint/run.hpp"

#include <filesystem>
#include <iostream>
#include <map>

#include "json.hpp"

#include "flashpoint/engine.hpp"
#include "flashpoint/gauge.hpp"
#include "flashpoint/io.hpp"
#include "flashpoint/opcore.hpp"
#include "flashpoint/povm.hpp"
#include "flashpoint/reconstruct.hpp"
#include "flashpoint/rgrwf/ck_lattice.hpp"
#include "flashpoint/rgrwf/process.hpp"
#include "flashpoint/stats.hpp"

namespace flashpoint {

using nlohmann::json;

namespace {

[[noreturn]] void config_fail(const std::string& path, const std::string& what) {
  throw ConfigError("config error at " + path + ": " + what);
}

const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) config_fail(path + "." + key, "missing field");
  return j.at(key);
}

double need_num(const json& j, const std::string& key, const std::string& path) {
  const json& v = need(j, key, path);
  if (!v.is_number()) config_fail(path + "." + key, "expected a number");
  return v.get<double>();
}

int need_int(const json& j, const std::string& key, const std::string& path) {
  const json& v = need(j, key, path);
  if (!v.is_number_integer()) config_fail(path + "." + key, "expected an integer");
  return v.get<int>();
}

uint64_t need_u64(const json& j, const std::string& key, const std::string& path) {
  const json& v = need(j, key, path);
  if (!v.is_number_unsigned() && !v.is_number_integer())
    config_fail(path + "." + key, "expected an unsigned integer");
  return v.get<uint64_t>();
}

std::string need_str(const json& j, const std::string& key, const std::string& path) {
  const json& v = need(j, key, path);
  if (!v.is_string()) config_fail(path + "." + key, "expected a string");
  return v.get<std::string>();
}

double opt_num(const json& j, const std::string& key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

int opt_int(const json& j, const std::string& key, int fallback) {
  return j.contains(key) ? j.at(key).get<int>() : fallback;
}

Matrix matrix_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) config_fail(path, "expected a matrix as array of rows");
  const size_t n = j.size();
  Matrix m(n, n);
  for (size_t r = 0; r < n; ++r) {
    if (!j[r].is_array() || j[r].size() != n)
      config_fail(path, "matrix rows must all have length " + std::to_string(n));
    for (size_t c = 0; c < n; ++c) {
      const json& e = j[r][c];
      if (e.is_number()) {
        m(r, c) = Complex(e.get<double>(), 0.0);
      } else if (e.is_array() && e.size() == 2) {
        m(r, c) = Complex(e[0].get<double>(), e[1].get<double>());
      } else {
        config_fail(path, "matrix entries are numbers or [re, im] pairs");
      }
    }
  }
  return m;
}

Tier tier_from_string(const std::string& s, const std::string& path) {
  if (s == "simple") return Tier::Simple;
  if (s == "labeled") return Tier::Labeled;
  if (s == "variable-rate") return Tier::VariableRate;
  if (s == "time-dependent") return Tier::TimeDependent;
  if (s == "past-dependent") return Tier::PastDependent;
  config_fail(path, "unknown tier '" + s + "'");
}

GrwfModel model_from_json(const json& j, const std::string& path) {
  std::string builder = need_str(j, "builder", path);
  if (builder == "gaussian" || builder == "identical-gaussian") {
    int n_q = need_int(j, "n_q", path);
    const json& box = need(j, "box", path);
    if (!box.is_array() || box.size() != 2) config_fail(path + ".box", "expected [x_min, x_max]");
    double lambda = need_num(j, "lambda", path);
    double sigma = need_num(j, "sigma", path);
    int n_particles = opt_int(j, "n_particles", 1);
    ParticleStatistics stat = builder == "identical-gaussian"
                                  ? ParticleStatistics::Identical
                                  : (j.contains("statistics") &&
                                             j.at("statistics").get<std::string>() == "identical"
                                         ? ParticleStatistics::Identical
                                         : ParticleStatistics::Distinguishable);
    int labels = stat == ParticleStatistics::Identical ? 1 : n_particles;
    ConfigSpace space(n_q, box[0].get<double>(), box[1].get<double>(), labels);
    Matrix h;
    if (j.contains("hamiltonian") && j.at("hamiltonian").is_array()) {
      h = matrix_from_json(j.at("hamiltonian"), path + ".hamiltonian");
    } else {
      double hop = opt_num(j, "hopping", 0.0);
      h = lattice_hopping_hamiltonian(space, n_particles, hop);
    }
    return make_gaussian_model(space, lambda, sigma, n_particles, stat, h);
  }
  if (builder == "constant-rate") {
    int n_q = need_int(j, "n_q", path);
    const json& box = need(j, "box", path);
    int labels = opt_int(j, "labels", 1);
    ConfigSpace space(n_q, box[0].get<double>(), box[1].get<double>(), labels);
    const json& fam = need(j, "collapse", path);
    if (!fam.is_array() || fam.size() != static_cast<size_t>(space.n_cells()))
      config_fail(path + ".collapse", "expected one matrix per (label, cell)");
    std::vector<Matrix> collapse;
    for (size_t i = 0; i < fam.size(); ++i)
      collapse.push_back(matrix_from_json(fam[i], path + ".collapse[" + std::to_string(i) + "]"));
    Matrix h = Matrix::Zero(collapse.front().rows(), collapse.front().cols());
    if (j.contains("hamiltonian")) h = matrix_from_json(j.at("hamiltonian"), path + ".hamiltonian");
    Tier tier = tier_from_string(j.contains("tier") ? j.at("tier").get<std::string>()
                                                    : std::string("variable-rate"),
                                 path + ".tier");
    return make_constant_model(space, std::move(collapse), h, tier);
  }
  if (builder == "fock") {
    int n_q = need_int(j, "n_q", path);
    const json& box = need(j, "box", path);
    ConfigSpace space(n_q, box[0].get<double>(), box[1].get<double>(), 1);
    return make_fock_truncated_model(space, need_int(j, "n_max", path),
                                     need_num(j, "lambda", path), need_num(j, "sigma", path),
                                     opt_num(j, "hopping", 0.0), opt_num(j, "pair_coupling", 0.0));
  }
  if (builder == "seeded-random") {
    int n_q = need_int(j, "n_q", path);
    const json& box = need(j, "box", path);
    int labels = opt_int(j, "labels", 1);
    ConfigSpace space(n_q, box[0].get<double>(), box[1].get<double>(), labels);
    Tier tier = tier_from_string(need_str(j, "tier", path), path + ".tier");
    Rng rng(need_u64(j, "model_seed", path));
    RandomModelOptions opt;
    opt.lambda = opt_num(j, "lambda", 1.0);
    opt.rate_floor = opt_num(j, "rate_floor", 0.25);
    opt.positive_collapse = !j.contains("positive_collapse") ||
                            j.at("positive_collapse").get<bool>();
    return random_model(tier, need_int(j, "dim", path), space, rng, opt);
  }
  config_fail(path + ".builder", "unknown builder '" + builder + "'");
}

Vector psi0_from_json(const json& j, int dim, const std::string& path) {
  if (!j.contains("psi0") || j.at("psi0").is_string()) {
    std::string kind = j.contains("psi0") ? j.at("psi0").get<std::string>() : "uniform";
    if (kind == "uniform") {
      Vector v = Vector::Constant(dim, Complex(1.0, 0.0));
      v.normalize();
      return v;
    }
    if (kind.rfind("basis:", 0) == 0) {
      int k = std::stoi(kind.substr(6));
      if (k < 0 || k >= dim) config_fail(path + ".psi0", "basis index out of range");
      Vector v = Vector::Zero(dim);
      v(k) = 1.0;
      return v;
    }
    if (kind == "seeded-random") {
      Rng rng(need_u64(j, "psi0_seed", path));
      return random_state(dim, rng);
    }
    config_fail(path + ".psi0", "unknown state spec '" + kind + "'");
  }
  const json& arr = j.at("psi0");
  if (!arr.is_array() || arr.size() != static_cast<size_t>(dim))
    config_fail(path + ".psi0", "expected " + std::to_string(dim) + " amplitudes");
  Vector v(dim);
  for (int i = 0; i < dim; ++i) {
    const json& e = arr[i];
    if (e.is_number())
      v(i) = Complex(e.get<double>(), 0.0);
    else
      v(i) = Complex(e[0].get<double>(), e[1].get<double>());
  }
  double n = v.norm();
  if (n < 1e-12) config_fail(path + ".psi0", "state has zero norm");
  return v / n;
}

json parse_config(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config error at $: not valid JSON");
  if (!j.is_object()) throw ConfigError("config error at $: expected a JSON object");
  return j;
}

std::string out_dir_of(const json& j, const RunOverrides& ov) {
  std::string dir = ov.out_dir ? *ov.out_dir
                               : (j.contains("out") ? j.at("out").get<std::string>() : "out");
  std::filesystem::create_directories(dir);
  return dir;
}

uint64_t seed_of(const json& j, const RunOverrides& ov, const std::string& path) {
  if (ov.seed) return *ov.seed;
  return need_u64(j, "seed", path);  // no wall-clock seeding: the seed is required
}

int guard_numerics(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const ZeroCollapseNorm& e) {
    std::cerr << "numerical failure in collapse: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const SingularOperator& e) {
    std::cerr << "numerical failure in polar/inverse: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const SingularDensity& e) {
    std::cerr << "numerical failure in reconstruction: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const NonConvergence& e) {
    std::cerr << "numerical failure (non-convergence): " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace

std::string builtin_preset(const std::string& name) {
  static const std::map<std::string, std::string> presets = {
      {"simple-dim2", R"({
  "schema_version": 1,
  "scheme": "simple",
  "seed": 20260811,
  "t0": 0.0,
  "trajectories": 10000,
  "stop": {"t_max": 20.0},
  "model": {"builder": "seeded-random", "tier": "simple", "dim": 2, "n_q": 8,
            "box": [-4.0, 4.0], "labels": 1, "lambda": 1.0, "model_seed": 7},
  "psi0": "seeded-random", "psi0_seed": 11,
  "out": "out"
})"},
      {"identical-3", R"({
  "schema_version": 1,
  "scheme": "simple",
  "seed": 20260812,
  "t0": 0.0,
  "trajectories": 10000,
  "stop": {"t_max": 5.0},
  "model": {"builder": "identical-gaussian", "n_q": 6, "box": [-3.0, 3.0],
            "lambda": 1.0, "sigma": 1.0, "n_particles": 3, "hopping": 0.3},
  "psi0": "seeded-random", "psi0_seed": 12,
  "out": "out"
})"},
      {"two-level", R"({
  "schema_version": 1,
  "scheme": "variable-rate",
  "seed": 20260813,
  "t0": 0.0,
  "trajectories": 1000,
  "stop": {"t_max": 10.0},
  "model": {"builder": "constant-rate", "n_q": 2, "box": [-1.0, 1.0], "labels": 1,
            "tier": "variable-rate",
            "collapse": [[[0.0, 0.0], [0.0, 0.9]], [[0.0, 0.0], [0.0, 0.7]]],
            "hamiltonian": [[0.3, 0.0], [0.0, -0.2]]},
  "psi0": "uniform",
  "out": "out"
})"},
      {"fock", R"({
  "schema_version": 1,
  "scheme": "variable-rate",
  "seed": 20260814,
  "t0": 0.0,
  "trajectories": 1000,
  "stop": {"t_max": 12.0},
  "model": {"builder": "fock", "n_q": 2, "box": [-1.0, 1.0], "n_max": 2,
            "lambda": 0.8, "sigma": 1.5, "hopping": 0.4},
  "psi0": "uniform",
  "out": "out"
})"},
      {"physical-grw", R"({
  "schema_version": 1,
  "scheme": "simple",
  "comment": "suggested values of the original model in SI units: lambda = 1e-15 / s, sigma = 1e-7 m; desk-scale runs should use natural units instead",
  "seed": 20260815,
  "t0": 0.0,
  "trajectories": 10,
  "stop": {"t_max": 1e16},
  "model": {"builder": "gaussian", "n_q": 8, "box": [-4e-7, 4e-7],
            "lambda": 1e-15, "sigma": 1e-7, "n_particles": 1, "hopping": 0.0},
  "psi0": "uniform",
  "out": "out"
})"},
      {"rgrwf-default", R"({
  "schema_version": 1,
  "seed": 20260816,
  "trajectories": 50,
  "n_per_label": 2,
  "lambda": 1.0,
  "profile": {"kind": "gaussian", "width": 1.0},
  "lattice": {"mass": 1.0, "x_min": -24.0, "x_max": 24.0, "n_x": 480, "dt": 0.05},
  "s_max": 4.0,
  "n_shells": 128,
  "labels": 2,
  "seeds": [[0.0, -3.0], [0.0, 3.0]],
  "packets": [{"center": -3.0, "width": 1.0, "momentum": 0.2},
              {"center": 3.0, "width": 1.0, "momentum": -0.2}],
  "out": "out"
})"},
      {"ck-demo", R"({
  "schema_version": 1,
  "seed": 20260817,
  "t_max": 6,
  "runs": 10000,
  "out": "out"
})"}};
  auto it = presets.find(name);
  if (it == presets.end()) throw ConfigError("unknown preset '" + name + "'");
  return it->second;
}

std::string load_config_text(const std::string& config_path, const std::string& preset) {
  if (!preset.empty()) return builtin_preset(preset);
  if (config_path.empty()) throw ConfigError("config error at $: --config or --preset required");
  return read_file(config_path);
}

int run_simulate(const std::string& config_text, const RunOverrides& ov) {
  return guard_numerics([&]() -> int {
    json j = parse_config(config_text);
    GrwfModel model = model_from_json(need(j, "model", "$"), "$.model");
    double t0 = need_num(j, "t0", "$");
    uint64_t seed = seed_of(j, ov, "$");
    int n_traj = ov.trajectories ? *ov.trajectories : need_int(j, "trajectories", "$");
    StopRule stop;
    const json& js = need(j, "stop", "$");
    if (js.contains("t_max")) stop.t_max = js.at("t_max").get<double>();
    if (js.contains("max_flashes")) stop.max_flashes = js.at("max_flashes").get<int>();
    if (!stop.t_max && !stop.max_flashes)
      config_fail("$.stop", "need t_max or max_flashes");
    Vector psi0 = psi0_from_json(j, model.hilbert_dim, "$");

    auto batch = run_batch(model, psi0, t0, stop, n_traj, seed);

    std::string dir = out_dir_of(j, ov);
    write_file(dir + "/records.jsonl", trajectories_to_jsonl(batch, model.space));

    // Summary statistics: counts, rates, interarrival KS.
    std::vector<double> counts, interarrivals;
    long cemeteries = 0;
    for (const auto& traj : batch) {
      double prev = t0;
      long c = 0;
      for (const auto& z : traj.flashes) {
        if (z.cemetery) {
          ++cemeteries;
          continue;
        }
        interarrivals.push_back(z.t - prev);
        prev = z.t;
        ++c;
      }
      counts.push_back(static_cast<double>(c));
    }
    auto mom = stats::moments(counts);
    json summary;
    summary["schema_version"] = kSchemaVersion;
    summary["config"] = j;
    summary["resolved_seed"] = seed;
    summary["trajectories"] = n_traj;
    summary["flash_count_mean"] = mom.mean;
    summary["flash_count_variance"] = mom.variance;
    summary["cemetery_count"] = cemeteries;
    if (stop.t_max)
      summary["empirical_total_rate"] = mom.mean / (*stop.t_max - t0);
    if (interarrivals.size() >= 100) {
      double rate = model.lambda_const ? *model.lambda_const
                                       : 1.0 / stats::moments(interarrivals).mean;
      auto ks = stats::ks_test_exponential(interarrivals, rate);
      summary["ks_exponential_stat"] = ks.statistic;
      summary["ks_exponential_p"] = ks.p_value;
      summary["ks_rate"] = rate;
      summary["ks_rate_estimated"] = !model.lambda_const.has_value();
    }
    write_file(dir + "/summary.json", summary.dump(2) + "\n");
    if (j.contains("plot_csv") && j.at("plot_csv").get<bool>() && stop.t_max)
      write_file(dir + "/flash_times.csv",
                 flash_time_histogram_csv(batch, t0, *stop.t_max, 50));
    std::cout << "simulate: " << n_traj << " trajectories, mean flashes " << mom.mean << "\n";
    return kExitOk;
  });
}

int run_rgrwf(const std::string& config_text, const RunOverrides& ov) {
  return guard_numerics([&]() -> int {
    json j = parse_config(config_text);
    rgrwf::RgrwfModel model;
    model.lambda = need_num(j, "lambda", "$");
    const json& jp = need(j, "profile", "$");
    std::string kind = need_str(jp, "kind", "$.profile");
    if (kind == "gaussian")
      model.profile.kind = rgrwf::Profile::Kind::Gaussian;
    else if (kind == "compact")
      model.profile.kind = rgrwf::Profile::Kind::CompactBump;
    else
      config_fail("$.profile.kind", "expected 'gaussian' or 'compact'");
    model.profile.width = need_num(jp, "width", "$.profile");
    const json& jl = need(j, "lattice", "$");
    model.lattice.mass = need_num(jl, "mass", "$.lattice");
    if (!(model.lattice.mass > 0.0)) config_fail("$.lattice.mass", "mass must be positive");
    model.lattice.x_min = need_num(jl, "x_min", "$.lattice");
    model.lattice.x_max = need_num(jl, "x_max", "$.lattice");
    model.lattice.n_x = need_int(jl, "n_x", "$.lattice");
    model.lattice.dt = need_num(jl, "dt", "$.lattice");
    model.n_labels = need_int(j, "labels", "$");
    model.s_max = opt_num(j, "s_max", 4.0);
    model.n_shells = opt_int(j, "n_shells", 128);
    uint64_t seed = seed_of(j, ov, "$");
    int n_traj = ov.trajectories ? *ov.trajectories : need_int(j, "trajectories", "$");
    int n_per_label = need_int(j, "n_per_label", "$");

    const json& jseeds = need(j, "seeds", "$");
    if (!jseeds.is_array() || static_cast<int>(jseeds.size()) != model.n_labels)
      config_fail("$.seeds", "need one [t, x] seed flash per label");
    std::vector<rgrwf::SpacetimePoint> seeds;
    for (const auto& s : jseeds) seeds.push_back({s[0].get<double>(), s[1].get<double>()});
    const json& jpk = need(j, "packets", "$");
    if (!jpk.is_array() || static_cast<int>(jpk.size()) != model.n_labels)
      config_fail("$.packets", "need one packet per label");

    rgrwf::DiracLattice lat(model.lattice);
    std::vector<rgrwf::SliceState> factors;
    for (int i = 0; i < model.n_labels; ++i) {
      const json& p = jpk[i];
      factors.push_back(lat.gaussian_packet(
          opt_num(p, "t0", 0.0), need_num(p, "center", "$.packets"),
          need_num(p, "width", "$.packets"), need_num(p, "momentum", "$.packets")));
    }

    std::vector<rgrwf::RgrwfResult> batch(n_traj);
    for (int k = 0; k < n_traj; ++k) {
      Rng rng = Rng::stream(seed, static_cast<uint64_t>(k));
      batch[k] = rgrwf::sample_rgrwf(model, seeds, factors, n_per_label, rng);
    }

    std::string dir = out_dir_of(j, ov);
    write_file(dir + "/records.jsonl", rgrwf_to_jsonl(batch));
    write_file(dir + "/scatter.csv", rgrwf_scatter_csv(batch));
    double worst_edge = 0.0, worst_trunc = 0.0;
    long causal_violations = 0;
    for (int k = 0; k < n_traj; ++k) {
      worst_edge = std::max(worst_edge, batch[k].diag.max_edge_mass);
      worst_trunc = std::max(worst_trunc, batch[k].diag.truncated_s_mass);
      for (int i = 0; i < model.n_labels; ++i) {
        rgrwf::SpacetimePoint prev = seeds[i];
        for (const auto& fl : batch[k].per_label[i]) {
          auto d = rgrwf::tdist(fl.x, prev);
          if (!d || *d <= 0.0) ++causal_violations;
          prev = fl.x;
        }
      }
    }
    json diag;
    diag["schema_version"] = kSchemaVersion;
    diag["config"] = j;
    diag["resolved_seed"] = seed;
    diag["max_edge_mass"] = worst_edge;
    diag["max_truncated_s_mass"] = worst_trunc;
    diag["causal_violations"] = causal_violations;
    write_file(dir + "/geometry.json", diag.dump(2) + "\n");
    std::cout << "rgrwf: " << n_traj << " trajectories, edge mass " << worst_edge << "\n";
    return kExitOk;
  });
}

int run_check_povm(const std::string& config_text, const RunOverrides& ov) {
  return guard_numerics([&]() -> int {
    json j = parse_config(config_text);
    GrwfModel model = model_from_json(need(j, "model", "$"), "$.model");
    double t0 = opt_num(j, "t0", 0.0);
    QuadratureSpec quad;
    quad.level = ov.quadrature_level ? *ov.quadrature_level : opt_int(j, "quadrature_level", 3);
    if (quad.level < 1 || quad.level > 3)
      config_fail("$.quadrature_level", "level must be 1..3");
    int n = opt_int(j, "n", 2);
    auto norm_rep = check_normalization(model, n, t0, quad);

    HistoryDensity d_n = density_from_model(model, n - 1, t0);
    HistoryDensity d_np1 = density_from_model(model, n, t0);
    Rng rng(seed_of(j, ov, "$"));
    std::vector<History> samples;
    int n_samples = opt_int(j, "histories", 10);
    for (int k = 0; k < n_samples; ++k) {
      History f;
      double t = t0;
      for (int i = 0; i < n - 1; ++i) {
        t += rng.exponential(1.0);
        f.push_back(FlashRecord::flash(static_cast<int>(rng.uniform() * model.space.n_q()), t,
                                       static_cast<int>(rng.uniform() * model.space.n_labels)));
      }
      samples.push_back(f);
    }
    auto cons_rep = check_consistency(d_np1, d_n, samples, quad);

    json out;
    out["normalization_dev"] = norm_rep.deviation;
    out["consistency_dev"] = cons_rep.max_deviation;
    out["quadrature_level"] = quad.level;
    std::string dir = out_dir_of(j, ov);
    write_file(dir + "/povm_report.json", out.dump(2) + "\n");
    std::cout << out.dump() << "\n";
    return kExitOk;
  });
}

int run_check_gauge(const std::string& config_text, const RunOverrides& ov) {
  return guard_numerics([&]() -> int {
    json j = parse_config(config_text);
    GrwfModel model = model_from_json(need(j, "model", "$"), "$.model");
    double t0 = opt_num(j, "t0", 0.0);
    Rng rng(seed_of(j, ov, "$"));
    int n_hist = opt_int(j, "histories", 6);
    int n_max = opt_int(j, "n_max", 2);

    std::map<std::string, GrwfModel> transformed;
    transformed.emplace("constant_unitary",
                        apply_gauge(model, constant_unitary_gauge(
                                               random_unitary(model.hilbert_dim, rng), t0),
                                    t0));
    if (model.const_hamiltonian)
      transformed.emplace(
          "heisenberg",
          apply_gauge(model, heisenberg_gauge_constant_h(*model.const_hamiltonian, t0), t0));
    // The plus pictures need bijective collapse operators; probe and skip
    // (with a note) when the model has singular ones.
    bool bijective = true;
    for (int label = 0; label < model.space.n_labels && bijective; ++label)
      for (int q = 0; q < model.space.n_q() && bijective; ++q)
        bijective = is_bijective(model.collapse_at({}, q, t0 + 0.1, label));
    std::vector<std::string> skipped;
    if (bijective)
      transformed.emplace("square_root", square_root_picture(model, t0));
    else
      skipped.push_back("square_root (collapse operators not bijective)");

    json devs;
    double overall = 0.0;
    for (auto& [name, tm] : transformed) {
      double worst = 0.0;
      for (int k = 0; k < n_hist; ++k) {
        int n = 1 + k % n_max;
        History f;
        double t = t0;
        for (int i = 0; i < n; ++i) {
          t += rng.exponential(2.0);
          f.push_back(FlashRecord::flash(static_cast<int>(rng.uniform() * model.space.n_q()), t,
                                         static_cast<int>(rng.uniform() * model.space.n_labels)));
        }
        Matrix l1 = ln_chain(model, f, t0);
        Matrix l2 = ln_chain(tm, f, t0);
        double dev =
            ((l1.adjoint() * l1) - (l2.adjoint() * l2)).cwiseAbs().maxCoeff();
        worst = std::max(worst, dev);
      }
      devs[name] = worst;
      overall = std::max(overall, worst);
    }
    json out;
    out["max_density_dev"] = overall;
    out["gauges"] = devs;
    out["skipped"] = skipped;
    std::string dir = out_dir_of(j, ov);
    write_file(dir + "/gauge_report.json", out.dump(2) + "\n");
    std::cout << out.dump() << "\n";
    return kExitOk;
  });
}

int run_reconstruct_roundtrip(const std::string& config_text, const RunOverrides& ov) {
  return guard_numerics([&]() -> int {
    json j = parse_config(config_text);
    GrwfModel model = model_from_json(need(j, "model", "$"), "$.model");
    double t0 = opt_num(j, "t0", 0.0);
    Rng rng(seed_of(j, ov, "$"));
    int n_hist = opt_int(j, "histories", 6);
    double gap = opt_num(j, "mean_gap", 0.3);

    DensityFamily fam = densities_from_model(model, t0, 3);
    auto rec_s = reconstruct_sqrt_plus(fam);
    ReconstructionSpec hspec;
    hspec.time_grid_step = opt_num(j, "time_grid_step", 0.05);
    auto rec_h = reconstruct_heisenberg_plus(fam, hspec);

    double dev_s = 0.0, dev_h = 0.0;
    for (int k = 0; k < n_hist; ++k) {
      int n = 1 + k % 2;
      History f;
      double t = t0;
      for (int i = 0; i < n; ++i) {
        t += rng.exponential(1.0 / gap);
        f.push_back(FlashRecord::flash(static_cast<int>(rng.uniform() * model.space.n_q()), t,
                                       static_cast<int>(rng.uniform() * model.space.n_labels)));
      }
      Matrix e = ln_chain(model, f, t0);
      e = e.adjoint() * e;
      Matrix es = ln_chain(rec_s.model, f, t0);
      dev_s = std::max(dev_s, (es.adjoint() * es - e).cwiseAbs().maxCoeff());
      Matrix eh = ln_chain(rec_h.model, f, t0);
      dev_h = std::max(dev_h, (eh.adjoint() * eh - e).cwiseAbs().maxCoeff());
    }
    json out;
    out["sqrt_plus_max_dev"] = dev_s;
    out["heisenberg_plus_max_dev"] = dev_h;
    out["histories"] = n_hist;
    std::string dir = out_dir_of(j, ov);
    write_file(dir + "/reconstruct_report.json", out.dump(2) + "\n");
    std::cout << out.dump() << "\n";
    return kExitOk;
  });
}

int run_ck_demo(const std::string& config_text, const RunOverrides& ov) {
  return guard_numerics([&]() -> int {
    json j = parse_config(config_text);
    int t_max = opt_int(j, "t_max", 6);
    int runs = ov.trajectories ? *ov.trajectories : opt_int(j, "runs", 10000);
    uint64_t seed = seed_of(j, ov, "$");
    long bad = 0;
    std::map<uint64_t, long> counts_left, counts_right;
    for (int k = 0; k < runs; ++k) {
      Rng rng = Rng::stream(seed, static_cast<uint64_t>(k));
      auto left = rgrwf::ck_lattice_simulate(t_max, rng, false);
      if (!rgrwf::ck_triples_ok(left)) ++bad;
      auto right = rgrwf::ck_lattice_simulate(t_max, rng, true);
      if (!rgrwf::ck_triples_ok(right)) ++bad;
      if (t_max <= 4) {
        ++counts_left[left.encode()];
        ++counts_right[right.encode()];
      }
    }
    json out;
    out["schema_version"] = kSchemaVersion;
    out["t_max"] = t_max;
    out["runs"] = runs;
    out["triple_violations"] = bad;
    if (t_max <= 4) {
      auto valid = rgrwf::ck_enumerate(t_max);
      std::vector<double> uniform(valid.size(), 1.0 / valid.size());
      std::vector<double> cl, cr;
      for (uint64_t code : valid) {
        cl.push_back(static_cast<double>(counts_left[code]));
        cr.push_back(static_cast<double>(counts_right[code]));
      }
      out["order_invariance_p_left"] = stats::chi_square_gof(cl, uniform).p_value;
      out["order_invariance_p_right"] = stats::chi_square_gof(cr, uniform).p_value;
    }
    std::string dir = out_dir_of(j, ov);
    write_file(dir + "/ck_report.json", out.dump(2) + "\n");
    std::cout << out.dump() << "\n";
    return bad == 0 ? kExitOk : kExitNumerical;
  });
}

int run_stats(const std::string& records_path, const RunOverrides& ov, double t0,
              std::optional<double> rate, const std::string& table_path) {
  return guard_numerics([&]() -> int {
    std::string text = read_file(records_path);
    std::istringstream is(text);
    std::string line;
    std::map<long, std::vector<std::pair<double, std::pair<int, double>>>> by_traj;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) throw ConfigError("records error: bad JSON line");
      if (j.contains("cemetery")) continue;
      long traj = j.at("traj").get<long>();
      double t = j.at("t").get<double>();
      int label = j.contains("label") ? j.at("label").get<int>() : 0;
      double q = j.contains("q") ? j.at("q").get<double>()
                                 : (j.contains("x") ? j.at("x").get<double>() : 0.0);
      by_traj[traj].push_back({t, {label, q}});
    }
    size_t total = 0;
    for (auto& [id, v] : by_traj) total += v.size();
    if (total < 100) {
      std::cerr << "stats: insufficient sample size (" << total << " < 100)\n";
      return kExitInsufficient;
    }
    std::vector<double> interarrivals, counts;
    for (auto& [id, v] : by_traj) {
      std::sort(v.begin(), v.end());
      double prev = t0;
      for (auto& [t, lq] : v) {
        interarrivals.push_back(t - prev);
        prev = t;
      }
      counts.push_back(static_cast<double>(v.size()));
    }
    json out;
    out["schema_version"] = kSchemaVersion;
    out["n_trajectories"] = by_traj.size();
    out["n_flashes"] = total;
    auto mom = stats::moments(counts);
    out["flash_count_mean"] = mom.mean;
    out["flash_count_variance"] = mom.variance;
    double r = rate ? *rate : 1.0 / stats::moments(interarrivals).mean;
    auto ks = stats::ks_test_exponential(interarrivals, r);
    out["ks_exponential_stat"] = ks.statistic;
    out["ks_exponential_p"] = ks.p_value;
    out["ks_rate"] = r;
    out["ks_rate_estimated"] = !rate.has_value();
    // Lag-1 independence of interarrival halves (above/below median).
    {
      std::vector<double> sorted = interarrivals;
      std::sort(sorted.begin(), sorted.end());
      double median = sorted[sorted.size() / 2];
      std::vector<std::vector<double>> table(2, std::vector<double>(2, 0.0));
      for (size_t i = 0; i + 1 < interarrivals.size(); ++i)
        table[interarrivals[i] > median][interarrivals[i + 1] > median] += 1.0;
      auto chi = stats::chi_square_independence(table);
      out["lag_independence_stat"] = chi.statistic;
      out["lag_independence_p"] = chi.p_value;
    }
    if (!table_path.empty()) {
      json tj = json::parse(read_file(table_path));
      // Expected first-flash distribution over (label, q) cells.
      std::vector<double> probs;
      std::vector<std::pair<int, double>> keys;
      for (const auto& cell : tj.at("cells")) {
        keys.push_back({cell.at("label").get<int>(), cell.at("q").get<double>()});
        probs.push_back(cell.at("p").get<double>());
      }
      std::vector<double> observed(keys.size(), 0.0);
      for (auto& [id, v] : by_traj) {
        if (v.empty()) continue;
        auto [t, lq] = v.front();
        size_t best = 0;
        double best_d = 1e300;
        for (size_t i = 0; i < keys.size(); ++i) {
          if (keys[i].first != lq.first) continue;
          double d = std::abs(keys[i].second - lq.second);
          if (d < best_d) {
            best_d = d;
            best = i;
          }
        }
        observed[best] += 1.0;
      }
      auto chi = stats::chi_square_gof(observed, probs);
      out["table_chi2_stat"] = chi.statistic;
      out["table_chi2_p"] = chi.p_value;
    }
    std::string dir = ov.out_dir ? *ov.out_dir : ".";
    std::filesystem::create_directories(dir);
    write_file(dir + "/stats_summary.json", out.dump(2) + "\n");
    std::cout << out.dump() << "\n";
    return kExitOk;
  });
}

}  // namespace flashpoint
