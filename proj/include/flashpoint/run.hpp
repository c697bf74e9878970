#pragma once

#include <optional>
#include <string>

#include "flashpoint/model.hpp"

namespace flashpoint {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitInsufficient = 4;
inline constexpr int kSchemaVersion = 1;

struct RunOverrides {
  std::optional<uint64_t> seed;
  std::optional<int> trajectories;
  std::optional<int> quadrature_level;
  std::optional<std::string> out_dir;
};

// Built-in configuration presets, by name; throws ConfigError on unknown names.
std::string builtin_preset(const std::string& name);

// Resolve --config / --preset into parsed JSON text.
std::string load_config_text(const std::string& config_path, const std::string& preset);

int run_simulate(const std::string& config_text, const RunOverrides& ov);
int run_rgrwf(const std::string& config_text, const RunOverrides& ov);
int run_check_povm(const std::string& config_text, const RunOverrides& ov);
int run_check_gauge(const std::string& config_text, const RunOverrides& ov);
int run_reconstruct_roundtrip(const std::string& config_text, const RunOverrides& ov);
int run_ck_demo(const std::string& config_text, const RunOverrides& ov);
int run_stats(const std::string& records_path, const RunOverrides& ov, double t0,
              std::optional<double> rate, const std::string& table_path);

}  // namespace flashpoint
