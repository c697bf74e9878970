#pragma once

#include <string>
#include <vector>

#include "flashpoint/engine.hpp"
#include "flashpoint/rgrwf/process.hpp"

namespace flashpoint {

// Decimal with 12 significant digits; the record format promises this.
std::string format_time(double t);

// One JSON object per flash: {"traj":i,"k":n,"label":l,"t":...,"q":...} with
// q the cell's coordinate; the cemetery mark becomes {"traj":i,"k":n,
// "cemetery":true}. Returns the full JSONL text.
std::string trajectories_to_jsonl(const std::vector<Trajectory>& batch, const ConfigSpace& space);

// rGRWf variant: {"traj":i,"label":l,"k":n,"t":...,"x":...,"tau_from_prev":...}.
std::string rgrwf_to_jsonl(const std::vector<rgrwf::RgrwfResult>& batch);

// Time histogram and flash scatter columns for plotting.
std::string flash_time_histogram_csv(const std::vector<Trajectory>& batch, double t0, double t_max,
                                     int bins);
std::string rgrwf_scatter_csv(const std::vector<rgrwf::RgrwfResult>& batch);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace flashpoint
