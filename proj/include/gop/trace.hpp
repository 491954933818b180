#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gop {

struct ObstacleRecord {
  int id = 0;
  double upsilon = 0.0;
  double contour = 1.0;
  bool active = false;
};

struct SimRecord {
  double t = 0.0;
  Eigen::Vector3d pos = Eigen::Vector3d::Zero();
  Eigen::Vector3d vel = Eigen::Vector3d::Zero();
  std::vector<ObstacleRecord> obstacles;  // declared obstacles only
  double cost_terminal = 0.0;
  double cost_smooth = 0.0;
  int scp_iterations = 0;
  double solve_ms = 0.0;
  bool scp_failed = false;
};

struct SimSummary {
  bool completed = false;
  double completion_time = 0.0;
  double path_length = 0.0;
  int steps = 0;
  std::vector<std::pair<int, double>> min_contour;  // per obstacle id
  std::vector<std::pair<int, double>> max_upsilon;
  std::optional<double> min_wall_clearance;  // corridor scenarios
  bool constraint_violated = false;
  std::uint64_t seed = 0;
};

struct SimTrace {
  std::string scenario;
  std::vector<SimRecord> records;
  SimSummary summary;
};

/// CSV serialization with 15 significant digits:
///   t,x,y,z,vx,vy,vz,obs<k>_upsilon,obs<k>_ct,obs<k>_active,...,
///   cost_terminal,cost_smooth,scp_iters,solve_ms
/// Timing is zeroed unless include_timing is set, keeping identical runs
/// byte-identical. Returns the number of bytes written.
std::size_t write_trace(const SimTrace& trace, std::ostream& out,
                        bool include_timing = false);

/// Summary sidecar in the same JSON key-value format as scenario files.
std::size_t write_summary(const SimTrace& trace, std::ostream& out);

/// Inverse of write_trace (summary fields are recomputed by callers).
SimTrace read_trace(std::istream& in);

/// Recomputes the reducible summary fields (min contour, max overlap,
/// path length, step count) from the records.
void recompute_summary_reductions(SimTrace& trace);

}  // namespace gop
