#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "gop/scp.hpp"

namespace gop {

/// Scenario file problems: syntax (with location) or validation (with the
/// offending field named).
class scenario_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scripted obstacle motion: fixed, straight-line over a duration, or a
/// sampled position sequence (constant-velocity extrapolated past its end).
struct ObstacleScript {
  enum class Kind { kStatic, kLinear, kSequence };
  Kind kind = Kind::kStatic;
  Eigen::Vector3d static_pos = Eigen::Vector3d::Zero();
  Eigen::Vector3d from = Eigen::Vector3d::Zero();
  Eigen::Vector3d to = Eigen::Vector3d::Zero();
  double duration = 1.0;
  std::vector<Eigen::Vector3d> points;
  double sample_tau = 0.1;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();
  double radius = 0.0;
  bool wall = false;
  int id = 0;

  Eigen::Vector3d position(double t) const;
  Eigen::Vector3d velocity(double t) const;
};

struct Corridor {
  Region box;
  double wall_thickness = 0.5;
  double wall_spacing = 0.5;
  double wall_cov = 1e-4;
  double wall_margin = 0.0;  // wall rows extend this far beyond both box ends
};

struct Scenario {
  std::string name = "scenario";
  int dim = 3;
  Eigen::Vector3d start = Eigen::Vector3d::Zero();
  Eigen::Vector3d goal = Eigen::Vector3d::Zero();
  Eigen::Matrix3d drone_cov = 0.02 * Eigen::Matrix3d::Identity();
  double drone_radius = 0.5;
  double kappa = 3.0;
  std::vector<ObstacleScript> obstacles;  // declared, dynamic or static
  std::optional<Corridor> corridor;
  double c_min = 0.9;
  std::optional<double> c_max;
  Eigen::Vector3d v_min = Eigen::Vector3d::Constant(-1.0);
  Eigen::Vector3d v_max = Eigen::Vector3d::Constant(1.0);
  Eigen::Vector3d a_min = Eigen::Vector3d::Constant(-1.0);
  Eigen::Vector3d a_max = Eigen::Vector3d::Constant(1.0);
  int horizon = 10;
  double tau = 0.3;
  double sensing_range = 10.0;
  double waypoint_spacing = 5.0;
  double goal_tolerance = 0.2;
  double cov_growth = 0.0;
  std::optional<int> step_budget;
  double smooth_weight = 1.0;
  double terminal_weight = 1.0;
  ScpSettings scp;

  /// Wall rows generated from the corridor declaration: static Gaussian
  /// obstacles along both y-sides of the box, spaced wall_spacing apart.
  std::vector<ObstacleScript> wall_obstacles() const;
};

struct ParseReport {
  std::vector<std::string> defaults_applied;
};

/// Parses and fully validates a scenario document (JSON syntax). Every
/// field not present in the file is filled with a documented default and
/// recorded in the report.
Scenario parse_scenario(const std::string& text, ParseReport* report = nullptr);

Scenario load_scenario_file(const std::string& path, ParseReport* report = nullptr);

}  // namespace gop
