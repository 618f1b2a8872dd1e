// Command-line front end: appg {run,verify,compare} CONFIG [options].

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include "appg/config.hpp"
#include "appg/errors.hpp"
#include "appg/experiment.hpp"
#include "appg/metrics.hpp"

namespace {

using namespace appg;

// Maps the library's exception types onto exit codes.
template <class F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
}

int run_one(const ExperimentConfig& cfg, const std::filesystem::path& dir, std::mutex& io) {
  const RunOutcome out = cmd_run(cfg, dir);
  std::lock_guard lock(io);
  std::cout << dir.string() << ": " << status_name(out.result.status) << " after "
            << out.result.trace.size() << " events";
  if (out.fit) std::cout << ", lambda_hat=" << format_double(out.fit->lambda);
  if (!out.residuals.dist_to_opt.empty() && out.residuals.dist_to_opt.back()) {
    std::cout << ", dist_to_opt=" << format_double(*out.residuals.dist_to_opt.back());
  }
  std::cout << '\n';
  return out.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous push-pull gradient simulator and verifier"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output;
  std::vector<std::uint64_t> seeds;
  int jobs = 1;

  auto* run = app.add_subcommand("run", "Simulate and write residuals.csv and summary.txt");
  run->add_option("config", config_path, "Experiment config")->required();
  run->add_option("-o,--output", output, "Output directory (overrides [output] dir)");
  run->add_option("--seeds", seeds, "Run once per async seed, into seed_<s> subdirectories")->delimiter(',');
  run->add_option("--jobs", jobs, "Parallel runs for --seeds")->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "Run the invariant battery");
  verify->add_option("config", config_path, "Experiment config")->required();

  auto* compare = app.add_subcommand("compare", "Push-pull against the tracking-free baseline");
  compare->add_option("config", config_path, "Experiment config")->required();
  compare->add_option("-o,--output", output, "Output directory (overrides [output] dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  return guarded([&]() -> int {
    const ExperimentConfig cfg = load_config(config_path);
    const std::filesystem::path dir = output.empty() ? cfg.output_dir : std::filesystem::path(output);
    std::mutex io;

    if (run->parsed()) {
      if (seeds.empty()) return run_one(cfg, dir, io);
      std::atomic<std::size_t> next{0};
      std::atomic<int> worst{0};
      std::vector<std::thread> pool;
      for (int j = 0; j < std::min<int>(jobs, static_cast<int>(seeds.size())); ++j) {
        pool.emplace_back([&] {
          for (std::size_t s; (s = next++) < seeds.size();) {
            ExperimentConfig local = cfg;
            local.async.seed = seeds[s];
            const int code = guarded([&] { return run_one(local, dir / ("seed_" + std::to_string(seeds[s])), io); });
            int prev = worst.load();
            while (code > prev && !worst.compare_exchange_weak(prev, code)) {
            }
          }
        });
      }
      for (auto& t : pool) t.join();
      return worst.load();
    }

    if (verify->parsed()) {
      const auto checks = cmd_verify(cfg);
      bool ok = true;
      for (const auto& c : checks) {
        const char* tag = c.skipped ? "SKIP" : (c.passed ? "PASS" : "FAIL");
        std::cout << tag << ' ' << c.name << ": " << c.detail << '\n';
        ok = ok && c.passed;
      }
      return ok ? kExitOk : kExitCheckFailed;
    }

    const CompareOutcome c = cmd_compare(cfg, dir);
    std::cout << "appg: " << status_name(c.appg_status) << ", dist_to_opt=" << format_double(c.appg_dist)
              << ", tracker_norm=" << format_double(c.appg_tracker) << '\n'
              << "baseline: dist_to_opt=" << format_double(c.baseline_dist) << " after " << c.events
              << " events\n";
    return c.appg_status == RunStatus::kConverged ? kExitOk : kExitCheckFailed;
  });
}
