#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "appg/engine.hpp"
#include "appg/graph.hpp"

namespace appg {

struct ObjectiveSpec {
  std::string family = "quadratic";  // quadratic | pl_nonconvex | logistic
  int dim = 5;
  std::uint64_t seed = 1;
  double condition = 10.0;
  std::filesystem::path dataset;  // logistic only, resolved against the config directory
  int label_column = -1;
  bool has_header = false;
  bool normalize = true;
  double reg = 1e-2;
};

struct InitSpec {
  std::string mode = "uniform";  // zeros | uniform | normal | constant
  double scale = 1.0;            // half-width (uniform), std (normal) or value (constant)
  std::uint64_t seed = 1;
};

struct VerifySpec {
  std::int64_t replay_events = 500;
  int contraction_t_max = 0;  // 0 picks 3 d_g b
  int contraction_samples = 10;
  int max_contraction_size = 200;  // skip product checks above this n_tilde
  int sync_rounds = 1000;
  int contraction_step_samples = 1000;
};

struct CompareSpec {
  int slow_node = 0;
  double slow_extra = 4.0;  // added to every gap of slow_node
};

struct ExperimentConfig {
  std::filesystem::path source;
  std::uint64_t hash = 0;  // FNV-1a of the config text

  TopologyKind topology = TopologyKind::kLog;
  int n = 1;
  std::filesystem::path edges_file;

  ObjectiveSpec objective;
  AsyncConfig async;
  std::optional<double> gamma;
  std::vector<double> per_node_gamma;
  InitSpec init;
  Horizon horizon;

  std::filesystem::path output_dir = "out";
  bool write_trace = false;

  VerifySpec verify;
  CompareSpec compare;

  std::vector<double> stepsizes() const;
};

std::uint64_t fnv1a(std::string_view text);

// Section-based INI text. Throws ConfigError with the offending line.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
// Throws IoError when the file cannot be read.
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace appg
