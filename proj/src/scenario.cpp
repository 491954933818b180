#include "gop/scenario.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include "gop/gaussian.hpp"

namespace gop {

using json = nlohmann::json;
using Eigen::Matrix3d;
using Eigen::Vector3d;

Vector3d ObstacleScript::position(double t) const {
  switch (kind) {
    case Kind::kStatic:
      return static_pos;
    case Kind::kLinear: {
      const double s = std::clamp(t / duration, 0.0, 1.0);
      return from + s * (to - from);
    }
    case Kind::kSequence: {
      if (points.size() == 1) return points.front();
      const double idx = t / sample_tau;
      if (idx <= 0.0) return points.front();
      const size_t last = points.size() - 1;
      if (idx >= static_cast<double>(last)) {
        // Constant-velocity extrapolation along the final segment.
        const Vector3d seg_vel = (points[last] - points[last - 1]) / sample_tau;
        return points[last] + (t - last * sample_tau) * seg_vel;
      }
      const size_t k = static_cast<size_t>(idx);
      const double s = idx - static_cast<double>(k);
      return points[k] + s * (points[k + 1] - points[k]);
    }
  }
  return static_pos;
}

Vector3d ObstacleScript::velocity(double t) const {
  switch (kind) {
    case Kind::kStatic:
      return Vector3d::Zero();
    case Kind::kLinear:
      return t < duration ? Vector3d((to - from) / duration) : Vector3d::Zero();
    case Kind::kSequence: {
      if (points.size() == 1) return Vector3d::Zero();
      const size_t last = points.size() - 1;
      const double idx = t / sample_tau;
      size_t k = idx <= 0.0 ? 0 : std::min(static_cast<size_t>(idx), last - 1);
      return (points[k + 1] - points[k]) / sample_tau;
    }
  }
  return Vector3d::Zero();
}

std::vector<ObstacleScript> Scenario::wall_obstacles() const {
  std::vector<ObstacleScript> walls;
  if (!corridor) return walls;
  const Region& box = corridor->box;
  const double spacing = corridor->wall_spacing;
  const double z = 0.5 * (box.min_corner.z() + box.max_corner.z());
  const double x_start = box.min_corner.x() - corridor->wall_margin;
  const double length =
      box.max_corner.x() - box.min_corner.x() + 2.0 * corridor->wall_margin;
  const int count = std::max(1, static_cast<int>(std::floor(length / spacing)) + 1);
  int next_id = 1000;
  for (double y : {box.min_corner.y(), box.max_corner.y()}) {
    for (int k = 0; k < count; ++k) {
      ObstacleScript wall;
      wall.kind = ObstacleScript::Kind::kStatic;
      wall.static_pos = Vector3d(x_start + k * spacing, y, z);
      wall.cov = corridor->wall_cov * Matrix3d::Identity();
      wall.radius = corridor->wall_thickness;
      wall.wall = true;
      wall.id = next_id++;
      walls.push_back(std::move(wall));
    }
  }
  return walls;
}

namespace {

[[noreturn]] void fail(const std::string& what) { throw scenario_error(what); }

class Reader {
 public:
  Reader(const json& root, int dim, ParseReport* report)
      : root_(root), dim_(dim), report_(report) {}

  void note_default(const std::string& field, const std::string& value) {
    if (report_) report_->defaults_applied.push_back(field + " = " + value);
  }

  double number(const json& node, const std::string& field) {
    if (!node.is_number()) fail(field + ": expected a number");
    return node.get<double>();
  }

  double number_or(const json& parent, const std::string& field, double fallback) {
    if (!parent.contains(field)) {
      note_default(field, std::to_string(fallback));
      return fallback;
    }
    return number(parent.at(field), field);
  }

  int integer_or(const json& parent, const std::string& field, int fallback) {
    if (!parent.contains(field)) {
      note_default(field, std::to_string(fallback));
      return fallback;
    }
    if (!parent.at(field).is_number_integer()) fail(field + ": expected an integer");
    return parent.at(field).get<int>();
  }

  // dim-length vectors are zero-padded to 3 components internally.
  Vector3d vec(const json& node, const std::string& field) {
    if (!node.is_array() || static_cast<int>(node.size()) != dim_) {
      fail(field + ": expected an array of " + std::to_string(dim_) + " numbers");
    }
    Vector3d out = Vector3d::Zero();
    for (int i = 0; i < dim_; ++i) out(i) = number(node.at(i), field);
    return out;
  }

  Vector3d vec_or(const json& parent, const std::string& field,
                  const Vector3d& fallback, const std::string& shown) {
    if (!parent.contains(field)) {
      note_default(field, shown);
      return fallback;
    }
    return vec(parent.at(field), field);
  }

  // A covariance is either a scalar (isotropic) or a dim x dim matrix; the
  // third axis is padded with a small variance for planar scenarios.
  Matrix3d covariance(const json& node, const std::string& field) {
    Matrix3d out = 1e-4 * Matrix3d::Identity();
    if (node.is_number()) {
      const double iso = node.get<double>();
      for (int i = 0; i < dim_; ++i) out(i, i) = iso;
    } else if (node.is_array()) {
      if (static_cast<int>(node.size()) != dim_) {
        fail(field + ": expected " + std::to_string(dim_) + " rows");
      }
      for (int r = 0; r < dim_; ++r) {
        const json& row = node.at(r);
        if (!row.is_array() || static_cast<int>(row.size()) != dim_) {
          fail(field + ": expected " + std::to_string(dim_) + " columns per row");
        }
        for (int c = 0; c < dim_; ++c) out(r, c) = number(row.at(c), field);
      }
    } else {
      fail(field + ": expected a scalar or a matrix");
    }
    std::string why;
    if (!is_valid_covariance(out.topLeftCorner(dim_, dim_), &why)) {
      fail(field + ": " + why);
    }
    return out;
  }

  const json& root() const { return root_; }

 private:
  const json& root_;
  int dim_;
  ParseReport* report_;
};

ObstacleScript parse_obstacle(Reader& reader, const json& node, int index, int dim) {
  const std::string tag = "obstacles[" + std::to_string(index) + "]";
  if (!node.is_object()) fail(tag + ": expected an object");
  ObstacleScript obs;
  obs.id = index;
  obs.cov = reader.covariance(node.contains("cov") ? node.at("cov") : json(0.02),
                              tag + ".cov");
  if (!node.contains("cov")) reader.note_default(tag + ".cov", "0.02 (isotropic)");
  obs.radius = reader.number_or(node, "radius", 0.5);

  if (!node.contains("trajectory")) fail(tag + ".trajectory: missing");
  const json& traj = node.at("trajectory");
  if (traj.contains("static")) {
    obs.kind = ObstacleScript::Kind::kStatic;
    obs.static_pos = reader.vec(traj.at("static"), tag + ".trajectory.static");
  } else if (traj.contains("linear")) {
    const json& lin = traj.at("linear");
    obs.kind = ObstacleScript::Kind::kLinear;
    obs.from = reader.vec(lin.at("from"), tag + ".trajectory.linear.from");
    obs.to = reader.vec(lin.at("to"), tag + ".trajectory.linear.to");
    obs.duration = reader.number(lin.at("duration"), tag + ".trajectory.linear.duration");
    if (!(obs.duration > 0.0)) fail(tag + ".trajectory.linear.duration: must be positive");
  } else if (traj.contains("sequence")) {
    const json& seq = traj.at("sequence");
    obs.kind = ObstacleScript::Kind::kSequence;
    obs.sample_tau = reader.number(seq.at("tau"), tag + ".trajectory.sequence.tau");
    if (!(obs.sample_tau > 0.0)) fail(tag + ".trajectory.sequence.tau: must be positive");
    if (!seq.contains("points") || !seq.at("points").is_array() ||
        seq.at("points").empty()) {
      fail(tag + ".trajectory.sequence.points: expected a non-empty array");
    }
    for (size_t k = 0; k < seq.at("points").size(); ++k) {
      obs.points.push_back(
          reader.vec(seq.at("points").at(k), tag + ".trajectory.sequence.points"));
    }
  } else {
    fail(tag + ".trajectory: expected one of static / linear / sequence");
  }
  (void)dim;
  return obs;
}

}  // namespace

Scenario parse_scenario(const std::string& text, ParseReport* report) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& err) {
    fail(std::string("syntax error: ") + err.what());
  }
  if (!root.is_object()) fail("top level: expected an object");

  Scenario sc;
  if (root.contains("dim")) {
    if (!root.at("dim").is_number_integer()) fail("dim: expected an integer");
    sc.dim = root.at("dim").get<int>();
  } else if (report) {
    report->defaults_applied.push_back("dim = 3");
  }
  if (sc.dim != 2 && sc.dim != 3) fail("dim: must be 2 or 3");

  Reader reader(root, sc.dim, report);

  sc.name = root.value("name", std::string("scenario"));
  if (!root.contains("name")) reader.note_default("name", "scenario");

  if (!root.contains("start")) fail("start: missing");
  if (!root.contains("goal")) fail("goal: missing");
  sc.start = reader.vec(root.at("start"), "start");
  sc.goal = reader.vec(root.at("goal"), "goal");

  if (root.contains("drone")) {
    const json& drone = root.at("drone");
    sc.drone_cov = reader.covariance(
        drone.contains("cov") ? drone.at("cov") : json(0.02), "drone.cov");
    if (!drone.contains("cov")) reader.note_default("drone.cov", "0.02 (isotropic)");
    sc.drone_radius = reader.number_or(drone, "radius", 0.5);
  } else {
    reader.note_default("drone", "cov 0.02 isotropic, radius 0.5");
    sc.drone_cov = Matrix3d::Identity() * 1e-4;
    for (int i = 0; i < sc.dim; ++i) sc.drone_cov(i, i) = 0.02;
  }
  sc.kappa = reader.number_or(root, "kappa", 3.0);
  if (!(sc.kappa > 0.0)) fail("kappa: must be positive");

  if (!root.contains("constraints")) fail("constraints: missing");
  const json& cons = root.at("constraints");
  if (!cons.contains("c_min")) fail("constraints.c_min: missing");
  sc.c_min = reader.number(cons.at("c_min"), "constraints.c_min");
  if (!(sc.c_min > 0.0 && sc.c_min < 1.0)) fail("constraints.c_min: must lie in (0,1)");
  if (cons.contains("c_max")) {
    sc.c_max = reader.number(cons.at("c_max"), "constraints.c_max");
    if (!(*sc.c_max > 0.0 && *sc.c_max < 1.0)) {
      fail("constraints.c_max: must lie in (0,1)");
    }
    if (*sc.c_max <= sc.c_min) fail("constraints: constraint band empty (c_max <= c_min)");
  }

  const json bounds = root.value("bounds", json::object());
  if (!root.contains("bounds")) reader.note_default("bounds", "v in [-1,1], a in [-1,1]");
  sc.v_min = reader.vec_or(bounds, "v_min", Vector3d::Constant(-1.0), "[-1,...]");
  sc.v_max = reader.vec_or(bounds, "v_max", Vector3d::Constant(1.0), "[1,...]");
  sc.a_min = reader.vec_or(bounds, "a_min", Vector3d::Constant(-1.0), "[-1,...]");
  sc.a_max = reader.vec_or(bounds, "a_max", Vector3d::Constant(1.0), "[1,...]");
  if (sc.dim == 2) {
    // Planar scenarios pin the vertical axis.
    sc.v_min.z() = sc.v_max.z() = 0.0;
    sc.a_min.z() = std::min(sc.a_min.z(), 0.0);
    sc.a_max.z() = std::max(sc.a_max.z(), 0.0);
  }
  for (int c = 0; c < 3; ++c) {
    if (sc.v_min(c) > sc.v_max(c)) fail("bounds: v_min exceeds v_max");
    if (sc.a_min(c) > sc.a_max(c)) fail("bounds: a_min exceeds a_max");
  }

  const json mpc = root.value("mpc", json::object());
  if (!root.contains("mpc")) reader.note_default("mpc", "all defaults");
  sc.horizon = reader.integer_or(mpc, "horizon", 10);
  if (sc.horizon < 3) fail("mpc.horizon: must be >= 3");
  sc.tau = reader.number_or(mpc, "tau", 0.3);
  if (!(sc.tau > 0.0)) fail("mpc.tau: must be positive");
  sc.sensing_range = reader.number_or(mpc, "sensing_range", 10.0);
  if (!(sc.sensing_range > 0.0)) fail("mpc.sensing_range: must be positive");
  sc.waypoint_spacing = reader.number_or(mpc, "waypoint_spacing", 5.0);
  sc.goal_tolerance = reader.number_or(mpc, "goal_tolerance", 0.2);
  sc.cov_growth = reader.number_or(mpc, "cov_growth", 0.0);
  if (mpc.contains("step_budget")) {
    sc.step_budget = reader.integer_or(mpc, "step_budget", 0);
    if (*sc.step_budget < 1) fail("mpc.step_budget: must be >= 1");
  }

  const json weights = root.value("weights", json::object());
  if (!root.contains("weights")) reader.note_default("weights", "smooth 1, terminal 1");
  sc.smooth_weight = reader.number_or(weights, "smooth", 1.0);
  sc.terminal_weight = reader.number_or(weights, "terminal", 1.0);

  const json scp = root.value("scp", json::object());
  if (!root.contains("scp")) reader.note_default("scp", "all defaults");
  sc.scp.cost_tolerance = reader.number_or(scp, "cost_tolerance", sc.scp.cost_tolerance);
  sc.scp.max_iterations = reader.integer_or(scp, "max_iterations", sc.scp.max_iterations);
  sc.scp.trust_initial = reader.number_or(scp, "trust_initial", sc.scp.trust_initial);
  sc.scp.slack_penalty = reader.number_or(scp, "slack_penalty", sc.scp.slack_penalty);
  sc.scp.activation_factor =
      reader.number_or(scp, "activation_factor", sc.scp.activation_factor);
  sc.scp.dense_limit = reader.integer_or(scp, "dense_limit", sc.scp.dense_limit);
  if (scp.contains("qp_mode")) {
    const std::string mode = scp.at("qp_mode").get<std::string>();
    if (mode == "auto") {
      sc.scp.qp_mode = QpMode::kAuto;
    } else if (mode == "dense") {
      sc.scp.qp_mode = QpMode::kDense;
    } else if (mode == "admm") {
      sc.scp.qp_mode = QpMode::kAdmm;
    } else {
      fail("scp.qp_mode: expected auto, dense, or admm");
    }
  } else {
    reader.note_default("scp.qp_mode", "auto");
  }

  if (root.contains("obstacles")) {
    const json& arr = root.at("obstacles");
    if (!arr.is_array()) fail("obstacles: expected an array");
    for (size_t k = 0; k < arr.size(); ++k) {
      sc.obstacles.push_back(
          parse_obstacle(reader, arr.at(k), static_cast<int>(k), sc.dim));
    }
  } else {
    reader.note_default("obstacles", "none");
  }

  if (root.contains("corridor")) {
    const json& cor = root.at("corridor");
    Corridor corridor;
    corridor.box.min_corner = reader.vec(cor.at("min"), "corridor.min");
    corridor.box.max_corner = reader.vec(cor.at("max"), "corridor.max");
    for (int c = 0; c < 3; ++c) {
      if (corridor.box.min_corner(c) > corridor.box.max_corner(c)) {
        fail("corridor: min corner exceeds max corner");
      }
    }
    corridor.wall_thickness = reader.number_or(cor, "wall_thickness", 0.5);
    corridor.wall_spacing =
        reader.number_or(cor, "wall_spacing", corridor.wall_thickness);
    corridor.wall_cov = reader.number_or(cor, "wall_cov", 1e-4);
    corridor.wall_margin = reader.number_or(cor, "wall_margin", 0.0);
    if (corridor.wall_margin < 0.0) fail("corridor.wall_margin: must be >= 0");
    if (!(corridor.wall_spacing > 0.0)) fail("corridor.wall_spacing: must be positive");
    if (!(corridor.wall_cov > 0.0)) fail("corridor.wall_cov: must be positive");
    sc.corridor = corridor;
  }

  // Scripted tracks must cover at least one horizon before extrapolation.
  for (const auto& obs : sc.obstacles) {
    if (obs.kind == ObstacleScript::Kind::kSequence) {
      const double covered = (obs.points.size() - 1) * obs.sample_tau;
      (void)covered;  // extrapolation pads the remainder by construction
    }
  }
  return sc;
}

Scenario load_scenario_file(const std::string& path, ParseReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open scenario file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str(), report);
}

}  // namespace gop
