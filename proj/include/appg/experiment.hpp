#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "appg/config.hpp"
#include "appg/engine.hpp"
#include "appg/graph.hpp"
#include "appg/metrics.hpp"
#include "appg/objective.hpp"

namespace appg {

struct Experiment {
  DirectedGraph graph;
  std::shared_ptr<Objective> objective;
  std::vector<double> stepsizes;
  std::vector<Vec> init;
};

// Resolves the objective optimum (closed form, known, or by centralized
// gradient descent for logistic losses).
Experiment build_experiment(const ExperimentConfig& cfg);

std::vector<Vec> initial_points(const InitSpec& spec, int n, int dim);

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,  // also horizon exhausted without convergence
  kExitConfig = 2,
  kExitIo = 3,
  kExitDiverged = 4,
};

struct RunOutcome {
  SimulationResult result;
  ResidualSeries residuals;
  std::optional<RateFit> fit;
  int exit_code = kExitOk;
};

// Runs the simulation and writes residuals.csv, summary.txt and, when
// requested, trace.jsonl into `out_dir`.
RunOutcome cmd_run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

struct CheckResult {
  std::string name;
  bool passed = false;
  bool skipped = false;
  std::string detail;
};

// Full invariant battery on fresh traces. Returns one entry per check.
std::vector<CheckResult> cmd_verify(const ExperimentConfig& cfg);

struct CompareOutcome {
  double appg_dist = 0.0;
  double baseline_dist = 0.0;
  double appg_tracker = 0.0;
  std::int64_t events = 0;
  RunStatus appg_status = RunStatus::kHorizonExhausted;
};

// Paired runs with compare.slow_node slowed: push-pull against the
// tracking-free baseline on the same schedule. Writes compare.txt.
CompareOutcome cmd_compare(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// Stable key=value lines, no timestamps.
void write_summary(const ExperimentConfig& cfg, const RunOutcome& outcome, std::ostream& out);

}  // namespace appg
