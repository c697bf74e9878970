#include "flashpoint/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace flashpoint {

std::string format_time(double t) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", t);
  return buf;
}

std::string trajectories_to_jsonl(const std::vector<Trajectory>& batch,
                                  const ConfigSpace& space) {
  std::ostringstream os;
  for (size_t i = 0; i < batch.size(); ++i) {
    const auto& traj = batch[i];
    for (size_t k = 0; k < traj.flashes.size(); ++k) {
      const FlashRecord& z = traj.flashes[k];
      if (z.cemetery) {
        os << "{\"traj\":" << i << ",\"k\":" << (k + 1) << ",\"cemetery\":true}\n";
      } else {
        os << "{\"traj\":" << i << ",\"k\":" << (k + 1) << ",\"label\":" << z.label
           << ",\"t\":" << format_time(z.t) << ",\"q\":" << format_time(space.grid[z.q])
           << "}\n";
      }
    }
  }
  return os.str();
}

std::string rgrwf_to_jsonl(const std::vector<rgrwf::RgrwfResult>& batch) {
  std::ostringstream os;
  for (size_t i = 0; i < batch.size(); ++i) {
    for (const auto& chain : batch[i].per_label)
      for (const auto& fl : chain) {
        os << "{\"traj\":" << i << ",\"label\":" << fl.label << ",\"k\":" << fl.k
           << ",\"t\":" << format_time(fl.x.t) << ",\"x\":" << format_time(fl.x.x)
           << ",\"tau_from_prev\":" << format_time(fl.tau_from_prev) << "}\n";
      }
  }
  return os.str();
}

std::string flash_time_histogram_csv(const std::vector<Trajectory>& batch, double t0,
                                     double t_max, int bins) {
  std::vector<long> counts(bins, 0);
  const double width = (t_max - t0) / bins;
  for (const auto& traj : batch)
    for (const auto& z : traj.flashes) {
      if (z.cemetery) continue;
      int b = static_cast<int>((z.t - t0) / width);
      if (b >= 0 && b < bins) ++counts[b];
    }
  std::ostringstream os;
  os << "bin_left,bin_right,count\n";
  for (int b = 0; b < bins; ++b)
    os << format_time(t0 + b * width) << "," << format_time(t0 + (b + 1) * width) << ","
       << counts[b] << "\n";
  return os.str();
}

std::string rgrwf_scatter_csv(const std::vector<rgrwf::RgrwfResult>& batch) {
  std::ostringstream os;
  os << "traj,label,k,t,x\n";
  for (size_t i = 0; i < batch.size(); ++i)
    for (const auto& chain : batch[i].per_label)
      for (const auto& fl : chain)
        os << i << "," << fl.label << "," << fl.k << "," << format_time(fl.x.t) << ","
           << format_time(fl.x.x) << "\n";
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << content;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace flashpoint
