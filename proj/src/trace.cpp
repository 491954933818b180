#include "gop/trace.hpp"

#include <json.hpp>

#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace gop {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  return buf;
}

}  // namespace

std::size_t write_trace(const SimTrace& trace, std::ostream& out, bool include_timing) {
  std::ostringstream text;
  text << "t,x,y,z,vx,vy,vz";
  const size_t num_obs = trace.records.empty() ? 0 : trace.records.front().obstacles.size();
  for (size_t k = 0; k < num_obs; ++k) {
    const int id = trace.records.front().obstacles[k].id;
    text << ",obs" << id << "_upsilon,obs" << id << "_ct,obs" << id << "_active";
  }
  text << ",cost_terminal,cost_smooth,scp_iters,solve_ms\n";

  for (const SimRecord& rec : trace.records) {
    text << num(rec.t) << ',' << num(rec.pos.x()) << ',' << num(rec.pos.y()) << ','
         << num(rec.pos.z()) << ',' << num(rec.vel.x()) << ',' << num(rec.vel.y())
         << ',' << num(rec.vel.z());
    if (rec.obstacles.size() != num_obs) {
      throw std::invalid_argument("write_trace: ragged obstacle records");
    }
    for (const ObstacleRecord& obs : rec.obstacles) {
      text << ',' << num(obs.upsilon) << ',' << num(obs.contour) << ','
           << (obs.active ? 1 : 0);
    }
    text << ',' << num(rec.cost_terminal) << ',' << num(rec.cost_smooth) << ','
         << rec.scp_iterations << ',' << num(include_timing ? rec.solve_ms : 0.0)
         << '\n';
  }
  const std::string payload = text.str();
  out << payload;
  if (!out) throw std::runtime_error("write_trace: output stream failure");
  return payload.size();
}

std::size_t write_summary(const SimTrace& trace, std::ostream& out) {
  nlohmann::json summary;
  summary["scenario"] = trace.scenario;
  summary["completed"] = trace.summary.completed;
  summary["completion_time"] = trace.summary.completion_time;
  summary["path_length"] = trace.summary.path_length;
  summary["steps"] = trace.summary.steps;
  summary["constraint_violated"] = trace.summary.constraint_violated;
  summary["seed"] = trace.summary.seed;
  nlohmann::json min_ct = nlohmann::json::object();
  for (const auto& [id, value] : trace.summary.min_contour) {
    min_ct["obs" + std::to_string(id)] = value;
  }
  summary["min_contour"] = min_ct;
  nlohmann::json max_ups = nlohmann::json::object();
  for (const auto& [id, value] : trace.summary.max_upsilon) {
    max_ups["obs" + std::to_string(id)] = value;
  }
  summary["max_upsilon"] = max_ups;
  if (trace.summary.min_wall_clearance) {
    summary["min_wall_clearance"] = *trace.summary.min_wall_clearance;
  }
  const std::string payload = summary.dump(2) + "\n";
  out << payload;
  if (!out) throw std::runtime_error("write_summary: output stream failure");
  return payload.size();
}

SimTrace read_trace(std::istream& in) {
  SimTrace trace;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_trace: empty input");

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 11 || header[0] != "t") {
    throw std::runtime_error("read_trace: unexpected header");
  }
  if ((header.size() - 11) % 3 != 0) {
    throw std::runtime_error("read_trace: malformed obstacle columns");
  }
  std::vector<int> obstacle_ids;
  for (size_t k = 0; k < (header.size() - 11) / 3; ++k) {
    const std::string& name = header[7 + 3 * k];
    if (name.rfind("obs", 0) != 0) throw std::runtime_error("read_trace: bad column " + name);
    obstacle_ids.push_back(std::stoi(name.substr(3, name.find('_') - 3)));
  }

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) {
      throw std::runtime_error("read_trace: ragged row");
    }
    SimRecord rec;
    size_t i = 0;
    rec.t = std::stod(cells[i++]);
    for (int c = 0; c < 3; ++c) rec.pos(c) = std::stod(cells[i++]);
    for (int c = 0; c < 3; ++c) rec.vel(c) = std::stod(cells[i++]);
    for (int id : obstacle_ids) {
      ObstacleRecord obs;
      obs.id = id;
      obs.upsilon = std::stod(cells[i++]);
      obs.contour = std::stod(cells[i++]);
      obs.active = cells[i++] == "1";
      rec.obstacles.push_back(obs);
    }
    rec.cost_terminal = std::stod(cells[i++]);
    rec.cost_smooth = std::stod(cells[i++]);
    rec.scp_iterations = std::stoi(cells[i++]);
    rec.solve_ms = std::stod(cells[i++]);
    trace.records.push_back(std::move(rec));
  }
  recompute_summary_reductions(trace);
  return trace;
}

void recompute_summary_reductions(SimTrace& trace) {
  auto& summary = trace.summary;
  summary.steps = static_cast<int>(trace.records.size());
  summary.path_length = 0.0;
  std::map<int, double> min_ct;
  std::map<int, double> max_ups;
  for (size_t r = 0; r < trace.records.size(); ++r) {
    if (r > 0) {
      summary.path_length +=
          (trace.records[r].pos - trace.records[r - 1].pos).norm();
    }
    for (const ObstacleRecord& obs : trace.records[r].obstacles) {
      auto [it_ct, fresh_ct] = min_ct.try_emplace(obs.id, obs.contour);
      if (!fresh_ct) it_ct->second = std::min(it_ct->second, obs.contour);
      auto [it_up, fresh_up] = max_ups.try_emplace(obs.id, obs.upsilon);
      if (!fresh_up) it_up->second = std::max(it_up->second, obs.upsilon);
    }
  }
  summary.min_contour.assign(min_ct.begin(), min_ct.end());
  summary.max_upsilon.assign(max_ups.begin(), max_ups.end());
}

}  // namespace gop
