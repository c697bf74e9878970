#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "flashpoint/run.hpp"
#include "flashpoint/types.hpp"

using namespace flashpoint;

int main(int argc, char** argv) {
  CLI::App app{"flashpoint: GRW-type flash process simulator and verifier"};
  app.require_subcommand(1);

  std::string config_path, preset;
  RunOverrides ov;
  uint64_t seed_flag = 0;
  int traj_flag = 0, quad_flag = 0;
  std::string out_flag;

  bool seed_given = false;
  auto add_common = [&](CLI::App* cmd, bool with_quad = false) {
    cmd->add_option("--config", config_path, "path to a JSON config");
    cmd->add_option("--preset", preset, "built-in preset name");
    cmd->add_option_function<uint64_t>(
        "--seed",
        [&](uint64_t v) {
          seed_flag = v;
          seed_given = true;
        },
        "master seed override");
    cmd->add_option("--trajectories", traj_flag, "trajectory count override");
    cmd->add_option("--out", out_flag, "output directory override");
    if (with_quad)
      cmd->add_option("--quadrature-level", quad_flag, "quadrature level 1..3")
          ->check(CLI::Range(1, 3));
  };

  CLI::App* sim = app.add_subcommand("simulate", "sample GRWf trajectories");
  add_common(sim);
  CLI::App* rg = app.add_subcommand("rgrwf", "sample the relativistic flash process");
  add_common(rg);
  CLI::App* check = app.add_subcommand("check", "verification sweeps");
  check->require_subcommand(1);
  CLI::App* povm = check->add_subcommand("povm", "normalization and consistency report");
  add_common(povm, true);
  CLI::App* gauge = check->add_subcommand("gauge", "gauge invariance report");
  add_common(gauge);
  CLI::App* rec = app.add_subcommand("reconstruct", "operator reconstruction");
  bool roundtrip = false;
  rec->add_flag("--roundtrip", roundtrip, "generate densities, reconstruct, compare");
  add_common(rec);
  CLI::App* ck = app.add_subcommand("ck-demo", "discrete space-time toy field");
  add_common(ck);
  CLI::App* st = app.add_subcommand("stats", "statistics over a records file");
  std::string records_path, table_path;
  double stats_t0 = 0.0;
  double stats_rate = 0.0;
  st->add_option("records", records_path, "records.jsonl path")->required();
  st->add_option("--t0", stats_t0, "initial time of the runs");
  st->add_option("--rate", stats_rate, "exponential rate for the KS test");
  st->add_option("--table", table_path, "expected first-flash table (JSON)");
  st->add_option("--out", out_flag, "output directory override");

  CLI11_PARSE(app, argc, argv);

  if (seed_given) ov.seed = seed_flag;
  if (traj_flag > 0) ov.trajectories = traj_flag;
  if (quad_flag > 0) ov.quadrature_level = quad_flag;
  if (!out_flag.empty()) ov.out_dir = out_flag;

  try {
    if (sim->parsed()) return run_simulate(load_config_text(config_path, preset), ov);
    if (rg->parsed()) return run_rgrwf(load_config_text(config_path, preset), ov);
    if (check->parsed() && povm->parsed())
      return run_check_povm(load_config_text(config_path, preset), ov);
    if (check->parsed() && gauge->parsed())
      return run_check_gauge(load_config_text(config_path, preset), ov);
    if (rec->parsed()) {
      if (!roundtrip) {
        std::cerr << "reconstruct: only --roundtrip is available\n";
        return kExitConfig;
      }
      return run_reconstruct_roundtrip(load_config_text(config_path, preset), ov);
    }
    if (ck->parsed()) return run_ck_demo(load_config_text(config_path, preset), ov);
    if (st->parsed())
      return run_stats(records_path, ov, stats_t0,
                       stats_rate > 0.0 ? std::optional<double>(stats_rate) : std::nullopt,
                       table_path);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitConfig;
}
