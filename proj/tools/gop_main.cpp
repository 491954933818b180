#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gop/gaussian.hpp"
#include "gop/constraint.hpp"
#include "gop/overlap.hpp"
#include "gop/scenario.hpp"
#include "gop/sim.hpp"
#include "gop/trace.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConstraintViolation = 1;
constexpr int kExitUsage = 2;

std::vector<double> parse_csv_numbers(const std::string& text, const std::string& what) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      values.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw gop::scenario_error(what + ": cannot parse '" + cell + "'");
    }
  }
  if (values.empty()) throw gop::scenario_error(what + ": empty");
  return values;
}

Eigen::VectorXd parse_mean(const std::string& text, const std::string& what) {
  const auto values = parse_csv_numbers(text, what);
  if (values.size() != 2 && values.size() != 3) {
    throw gop::scenario_error(what + ": expected 2 or 3 components");
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
}

Eigen::MatrixXd parse_cov(const std::string& text, int dim, const std::string& what) {
  const auto values = parse_csv_numbers(text, what);
  if (static_cast<int>(values.size()) == 1) {
    return values[0] * Eigen::MatrixXd::Identity(dim, dim);
  }
  if (static_cast<int>(values.size()) != dim * dim) {
    throw gop::scenario_error(what + ": expected " + std::to_string(dim * dim) +
                              " row-major entries or a single isotropic value");
  }
  Eigen::MatrixXd cov(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) cov(r, c) = values[r * dim + c];
  }
  return cov;
}

std::uint64_t resolve_seed(const CLI::Option* seed_option, std::uint64_t seed_value) {
  if (seed_option->count() > 0) return seed_value;
  if (const char* env = std::getenv("GOP_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw gop::scenario_error("GOP_SEED: cannot parse '" + std::string(env) + "'");
    }
  }
  return seed_value;
}

int run_command(const std::string& path, const std::string& out_path,
                std::uint64_t seed, bool verbose, bool timing) {
  const gop::Scenario scenario = gop::load_scenario_file(path);

  gop::StepObserver observer;
  if (verbose) {
    observer = [](const gop::SimRecord& rec, const gop::MpcStepResult& step) {
      std::cerr << "t=" << rec.t << " pos=" << rec.pos.transpose()
                << " waypoint=" << step.waypoint.transpose()
                << " iters=" << step.plan.scp_iterations
                << " solve_ms=" << step.solve_ms << (step.scp_failed ? " BRAKE" : "")
                << '\n';
      for (const auto& it : step.plan.diagnostics) {
        std::cerr << "    scp " << it.iteration << ": merit=" << it.merit
                  << " max_violation=" << it.max_violation
                  << " trust=" << it.trust_radius
                  << (it.accepted ? "" : " rejected") << '\n';
      }
    };
  }

  const gop::SimTrace trace = gop::run_scenario(scenario, seed, observer);

  if (out_path.empty()) {
    gop::write_trace(trace, std::cout, timing);
    gop::write_summary(trace, std::cerr);
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
      std::cerr << "error: cannot open " << out_path << " for writing\n";
      return kExitUsage;
    }
    gop::write_trace(trace, out, timing);
    std::ofstream summary_out(out_path + ".summary.json", std::ios::binary);
    gop::write_summary(trace, summary_out);
    std::cout << (trace.summary.completed ? "completed" : "incomplete") << " in "
              << trace.summary.steps << " steps, path "
              << trace.summary.path_length << " m\n";
  }
  return trace.summary.constraint_violated ? kExitConstraintViolation : kExitOk;
}

int overlap_command(const std::string& mean1_text, const std::string& cov1_text,
                    const std::string& mean2_text, const std::string& cov2_text,
                    double radius1, double radius2, double kappa, int mc_samples,
                    std::uint64_t seed) {
  const Eigen::VectorXd mean1 = parse_mean(mean1_text, "--mean1");
  const Eigen::VectorXd mean2 = parse_mean(mean2_text, "--mean2");
  if (mean1.size() != mean2.size()) {
    throw gop::scenario_error("means must have the same dimension");
  }
  const int dim = static_cast<int>(mean1.size());
  Eigen::MatrixXd cov1 = parse_cov(cov1_text, dim, "--cov1");
  Eigen::MatrixXd cov2 = parse_cov(cov2_text, dim, "--cov2");
  cov1 = gop::inflate(cov1, radius1, kappa);
  cov2 = gop::inflate(cov2, radius2, kappa);

  const gop::Gaussian g1(mean1, cov1);
  const gop::Gaussian g2(mean2, cov2);
  const gop::Separator sep = gop::solve_lambda(g1, g2);
  std::cout << "lambda  " << sep.lambda << '\n'
            << "eta1    " << sep.eta1 << '\n'
            << "eta2    " << sep.eta2 << '\n'
            << "upsilon " << sep.overlap << '\n'
            << "c_t     "
            << (sep.degenerate ? 0.0 : gop::overlap_to_contour(sep.overlap, dim))
            << '\n';
  if (mc_samples > 0 && !sep.degenerate) {
    const auto est = gop::monte_carlo_misclassification(g1, g2, sep, mc_samples,
                                                        std::mt19937_64(seed));
    std::cout << "mc_p1   " << est.p1_hat << '\n'
              << "mc_p2   " << est.p2_hat << '\n';
  }
  return kExitOk;
}

int check_command(const std::string& path) {
  gop::ParseReport report;
  const gop::Scenario scenario = gop::load_scenario_file(path, &report);
  std::cout << "scenario '" << scenario.name << "' is valid\n"
            << "  dim " << scenario.dim << ", horizon " << scenario.horizon
            << ", tau " << scenario.tau << ", sensing range "
            << scenario.sensing_range << '\n'
            << "  c_min " << scenario.c_min;
  if (scenario.c_max) std::cout << ", c_max " << *scenario.c_max;
  std::cout << '\n'
            << "  obstacles " << scenario.obstacles.size() << ", wall obstacles "
            << scenario.wall_obstacles().size() << '\n';
  if (!report.defaults_applied.empty()) {
    std::cout << "defaults applied:\n";
    for (const auto& line : report.defaults_applied) {
      std::cout << "  " << line << '\n';
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic collision avoidance via Gaussian overlap"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a scenario under receding-horizon control");
  std::string run_path, run_out;
  std::uint64_t seed = 0;
  bool verbose = false;
  bool timing = false;
  run->add_option("scenario", run_path, "Scenario file")->required();
  run->add_option("--out", run_out, "Trace CSV destination (stdout when absent)");
  auto* seed_option = run->add_option("--seed", seed, "Seed recorded in the summary");
  run->add_flag("--verbose", verbose, "Per-step diagnostics on stderr");
  run->add_flag("--timing", timing, "Record wall-clock solve times in the trace");

  auto* overlap = app.add_subcommand("overlap", "Minmax overlap of two Gaussians");
  std::string mean1, cov1, mean2, cov2;
  double radius1 = 0.0, radius2 = 0.0, kappa = 3.0;
  int mc_samples = 0;
  std::uint64_t overlap_seed = 0;
  overlap->add_option("--mean1", mean1, "First mean, comma separated")->required();
  overlap->add_option("--cov1", cov1, "First covariance, row-major or isotropic scalar")
      ->required();
  overlap->add_option("--mean2", mean2, "Second mean")->required();
  overlap->add_option("--cov2", cov2, "Second covariance")->required();
  overlap->add_option("--radius1", radius1, "Radius inflating the first covariance");
  overlap->add_option("--radius2", radius2, "Radius inflating the second covariance");
  overlap->add_option("--kappa", kappa, "Inflation divisor");
  overlap->add_option("--mc", mc_samples, "Monte-Carlo cross-check sample count");
  auto* overlap_seed_option = overlap->add_option("--seed", overlap_seed, "Sampling seed");

  auto* table = app.add_subcommand("table", "Contour-of-touch to overlap table");
  int dim = 2;
  double step = 0.01;
  table->add_option("--dim", dim, "Dimension, 2 or 3")->required();
  table->add_option("--step", step, "Grid step in (0,1)");

  auto* check = app.add_subcommand("check", "Validate a scenario without running it");
  std::string check_path;
  check->add_option("scenario", check_path, "Scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitUsage;
  }

  try {
    if (run->parsed()) {
      return run_command(run_path, run_out, resolve_seed(seed_option, seed), verbose,
                         timing);
    }
    if (overlap->parsed()) {
      return overlap_command(mean1, cov1, mean2, cov2, radius1, radius2, kappa,
                             mc_samples,
                             resolve_seed(overlap_seed_option, overlap_seed));
    }
    if (table->parsed()) {
      if (dim != 2 && dim != 3) {
        std::cerr << "error: --dim must be 2 or 3\n";
        return kExitUsage;
      }
      gop::write_contour_table(std::cout, dim, step);
      return kExitOk;
    }
    if (check->parsed()) return check_command(check_path);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
