// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--expect-fail N[,M...]] [--only N[,M...]]
//
// Without --expect-fail the exit code is 0 iff every criterion passes. With it,
// the exit code is 0 iff the failing set equals the expected set exactly.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "appg/augmented.hpp"
#include "appg/config.hpp"
#include "appg/experiment.hpp"
#include "appg/metrics.hpp"
#include "appg/reference.hpp"

using namespace appg;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string sci(double v) { return fmt("%.3g", v); }

// Runs body(i) for i in [0, count) on the available cores.
void parallel_for(int count, const std::function<void(int)>& body) {
  const int workers = std::max(1, std::min<int>(count, static_cast<int>(std::thread::hardware_concurrency())));
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i; (i = next++) < count;) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::vector<Vec> uniform_init(int n, int dim, std::uint64_t seed, double scale) {
  return initial_points(InitSpec{"uniform", scale, seed}, n, dim);
}

ExperimentConfig config(const std::string& name) {
  return load_config(fs::path(APPG_CONFIG_DIR) / name);
}

// 1. Mass conservation at every inter-event instant.
Verdict mass_conservation() {
  const std::vector<int> sizes = {3, 8, 16};
  const std::vector<TopologyKind> kinds = {TopologyKind::kLog, TopologyKind::kRing, TopologyKind::kFully};
  const int seeds = 20;
  const int total = seeds * static_cast<int>(sizes.size() * kinds.size());
  std::mutex mu;
  double worst = 0.0;
  std::int64_t instants = 0;
  int short_runs = 0;
  parallel_for(total, [&](int job) {
    const int seed = job % seeds + 1;
    const int n = sizes[(job / seeds) % sizes.size()];
    const TopologyKind kind = kinds[job / (seeds * static_cast<int>(sizes.size()))];
    auto g = build_topology(kind, n);
    auto obj = make_quadratic(n, 3, 100 + seed, 10.0);
    AsyncConfig cfg;
    cfg.tau_lo = 1.0;
    cfg.tau_hi = 3.0;
    cfg.delay_max = 2.0;
    cfg.seed = static_cast<std::uint64_t>(seed);
    SimOptions opts;
    opts.record_snapshots = false;
    opts.check_mass = true;
    auto res = run_simulation(g, obj, cfg, std::vector<double>(n, 0.01), uniform_init(n, 3, seed, 1.0),
                              Horizon{10000, std::nullopt}, opts);
    std::lock_guard lock(mu);
    if (res.trace.size() != 10000 || !res.mass) {
      ++short_runs;
      return;
    }
    worst = std::max(worst, res.mass->max_relative_defect);
    instants += res.mass->checks;
  });
  return {short_runs == 0 && worst <= 1e-9,
          std::to_string(total) + " runs, " + std::to_string(instants) +
              " instants, worst D/(1+|sum g|) = " + sci(worst) +
              (short_runs ? ", " + std::to_string(short_runs) + " runs ended early" : "")};
}

// 2. Lockstep engine against the synchronous iteration.
Verdict synchronous_reduction() {
  const int n = 8;
  const int rounds = 1000;
  auto cfg = config("lockstep.ini");
  auto ex = build_experiment(cfg);
  auto res = run_simulation(ex.graph, ex.objective, cfg.async, ex.stepsizes, ex.init,
                            Horizon{static_cast<std::int64_t>(n) * rounds, std::nullopt});
  Mat x0(n, ex.objective->dim());
  for (int i = 0; i < n; ++i) x0.row(i) = ex.init[i].transpose();
  auto hist = sync_push_pull(make_sync_system(ex.graph, ex.stepsizes), *ex.objective, x0, rounds, {true});
  double dev = 0.0;
  double identity = 0.0;
  for (int r = 1; r <= rounds; ++r) {
    const Mat& x = res.trace.x_snapshots[static_cast<std::size_t>(n) * r];
    const Mat& y = res.trace.y_snapshots[static_cast<std::size_t>(n) * r];
    dev = std::max({dev, (x - hist.x[r]).lpNorm<Eigen::Infinity>(), (y - hist.y[r]).lpNorm<Eigen::Infinity>()});
    const Vec ysum = y.colwise().sum().transpose();
    const Vec gsum = stacked_gradient(*ex.objective, x).colwise().sum().transpose();
    identity = std::max(identity, (ysum - gsum).lpNorm<Eigen::Infinity>());
  }
  return {dev <= 1e-12 && identity <= 1e-10,
          "n=8, 1000 rounds, max |engine - sync| = " + sci(dev) + ", max |1'Y - 1'grad| = " + sci(identity)};
}

// 3. Augmented replay and stochasticity.
Verdict augmented_replay() {
  double dev = 0.0;
  double rows = 0.0;
  double cols = 0.0;
  std::int64_t events = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const int n = 5;
    auto g = build_topology(TopologyKind::kLog, n);
    auto obj = make_quadratic(n, 3, seed, 10.0);
    AsyncConfig cfg;
    cfg.tau_lo = 1.0;
    cfg.tau_hi = 2.0;
    cfg.delay_max = 2.0;
    cfg.seed = seed;
    std::vector<double> gammas(n, 0.04);
    auto res = run_simulation(g, obj, cfg, gammas, uniform_init(n, 3, seed, 1.0), Horizon{600, std::nullopt});
    auto rep = replay_augmented(res.trace, g, *obj, gammas, delay_bounds(n, cfg).b);
    dev = std::max(dev, rep.max_deviation());
    rows = std::max(rows, rep.max_row_sum_error);
    cols = std::max(cols, rep.max_col_sum_error);
    events += rep.events;
  }
  return {dev <= 1e-10 && rows <= 1e-14 && cols <= 1e-14,
          "5 seeds, " + std::to_string(events) + " events, max deviation " + sci(dev) +
              ", row sums " + sci(rows) + ", column sums " + sci(cols)};
}

// 4. Activation windows, delivery deadlines and staleness.
Verdict trace_bounds() {
  std::mutex mu;
  std::int64_t violations = 0;
  std::int64_t windows = 0;
  std::int64_t consumptions = 0;
  std::int64_t max_stale = 0;
  int b = 0;
  std::string first;
  parallel_for(10, [&](int job) {
    const int n = 8;
    const auto seed = static_cast<std::uint64_t>(job + 1);
    auto g = build_topology(TopologyKind::kLog, n);
    auto obj = make_quadratic(n, 2, seed, 10.0);
    AsyncConfig cfg;
    cfg.tau_lo = 1.0;
    cfg.tau_hi = 2.0;
    cfg.delay_max = 2.0;
    cfg.seed = seed;
    SimOptions opts;
    opts.record_snapshots = false;
    auto res = run_simulation(g, obj, cfg, std::vector<double>(n, 0.02), uniform_init(n, 2, seed, 1.0),
                              Horizon{10000, std::nullopt}, opts);
    auto rep = check_trace_bounds(res.trace, delay_bounds(n, cfg));
    std::lock_guard lock(mu);
    violations += rep.violations();
    windows += rep.windows_checked;
    consumptions += rep.consumptions_checked;
    max_stale = std::max(max_stale, rep.max_staleness);
    b = rep.bounds.b;
    if (first.empty()) first = rep.first_violation;
  });
  return {violations == 0,
          "10 seeds x 10000 events, b=" + std::to_string(b) + ", " + std::to_string(windows) + " windows, " +
              std::to_string(consumptions) + " consumptions, max staleness " + std::to_string(max_stale) +
              ", violations " + std::to_string(violations) + (first.empty() ? "" : " (" + first + ")")};
}

// 5. Linear convergence through the run command.
Verdict linear_convergence() {
  const auto start = std::chrono::steady_clock::now();
  auto cfg = config("linear.ini");
  const fs::path dir = fs::temp_directory_path() / "appg_acceptance_linear";
  auto out = cmd_run(cfg, dir);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  fs::remove_all(dir);
  const Vec x_star = *build_experiment(cfg).objective->metadata().x_star;
  double max_dist = 0.0;
  double max_y = 0.0;
  for (const auto& node : out.result.nodes) {
    max_dist = std::max(max_dist, (node.x - x_star).norm());
    max_y = std::max(max_y, node.y.norm());
  }
  const double tol = 1e-6 * (1.0 + x_star.norm());
  const bool fit_ok = out.fit && out.fit->lambda < 1.0 && out.fit->r_squared >= 0.99;
  return {out.result.status == RunStatus::kConverged && max_dist <= tol && max_y <= 1e-8 && fit_ok &&
              seconds <= 30.0,
          std::to_string(out.result.trace.size()) + " events, max |x_i - x*| = " + sci(max_dist) + " (tol " +
              sci(tol) + "), max |y_i| = " + sci(max_y) + ", lambda_hat = " +
              (out.fit ? fmt("%.5f", out.fit->lambda) + ", R^2 = " + fmt("%.4f", out.fit->r_squared) : "n/a") +
              ", " + fmt("%.2f", seconds) + " s"};
}

// 6. Non-convex PL objective.
Verdict pl_convergence() {
  auto base = config("pl.ini");
  double worst = 0.0;
  int converged = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ExperimentConfig cfg = base;
    cfg.async.seed = seed;
    cfg.init.seed = seed;
    auto ex = build_experiment(cfg);
    SimOptions opts;
    opts.record_snapshots = false;
    auto res = run_simulation(ex.graph, ex.objective, cfg.async, ex.stepsizes, ex.init, cfg.horizon, opts);
    Vec mean = Vec::Zero(1);
    for (const auto& node : res.nodes) mean += node.x / static_cast<double>(res.nodes.size());
    worst = std::max(worst, ex.objective->value(mean));
    if (res.status == RunStatus::kConverged) ++converged;
  }
  return {converged == 10 && worst <= 1e-10,
          std::to_string(converged) + "/10 seeds converged, worst f(mean x) = " + sci(worst)};
}

// 7. Rank-one contraction of the augmented products.
Verdict product_contraction_check() {
  auto cfg = config("contraction.ini");
  auto ex = build_experiment(cfg);
  auto res = run_simulation(ex.graph, ex.objective, cfg.async, ex.stepsizes, ex.init, cfg.horizon);
  const auto bounds = delay_bounds(cfg.n, cfg.async);
  auto rep = product_contraction(res.trace, ex.graph, bounds.b, cfg.verify.contraction_t_max, 10);
  int asserted = 0;
  double worst_excess = 0.0;
  int worst_t = 0;
  for (const auto& gp : rep.gaps) {
    if (!gp.asserted) continue;
    ++asserted;
    const double excess = std::max(gp.gap_a, gp.gap_b) - static_cast<double>(gp.bound);
    if (excess > worst_excess) {
      worst_excess = excess;
      worst_t = gp.t;
    }
  }
  return {rep.violations == 0 && rep.row_sum_violations == 0,
          "n_tilde=" + std::to_string(rep.constants.n_tilde) + ", d_g*b=" + std::to_string(rep.constants.exponent) +
              ", " + std::to_string(rep.violations) + "/" + std::to_string(asserted) +
              " sampled gaps above 2 rho^t (worst excess " + sci(worst_excess) + " at t=" +
              std::to_string(worst_t) + "), within bound from t=" + std::to_string(rep.first_t_within_bound) +
              ", row-sum violations " + std::to_string(rep.row_sum_violations)};
}

// 8. Perturbed gradient step contraction.
Verdict perturbed_contraction() {
  int failures = 0;
  int samples = 0;
  double worst = -INFINITY;
  for (std::uint64_t q = 1; q <= 5; ++q) {
    auto obj = make_quadratic(4, 3, 200 + q, 10.0 * static_cast<double>(q));
    const auto& meta = obj->metadata();
    const double beta = obj->global_beta();
    std::mt19937_64 rng(q);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(1e-6, 1.0);
    std::uniform_real_distribution<double> log_scale(-4.0, 1.0);
    for (int s = 0; s < 1000; ++s) {
      const double x_scale = std::pow(10.0, log_scale(rng));
      const double e_scale = std::pow(10.0, log_scale(rng));
      Vec x = *meta.x_star;
      Vec eps(3);
      for (int d = 0; d < 3; ++d) {
        x(d) += x_scale * normal(rng);
        eps(d) = e_scale * normal(rng);
      }
      const double eta = unit(rng) / (2.0 * beta);
      auto c = perturbed_gd_contraction_check(*obj, x, eta, eps);
      ++samples;
      if (!c.holds) ++failures;
      worst = std::max(worst, (c.lhs - c.rhs) / (1.0 + std::abs(c.rhs)));
    }
  }
  return {failures == 0, std::to_string(samples) + " samples on 5 quadratics, failures " + std::to_string(failures) +
                             ", max (lhs - rhs)/(1 + |rhs|) = " + sci(worst)};
}

// 9. Push-pull against the tracking-free baseline with a slow node.
Verdict uneven_rates() {
  auto base = config("compare.ini");
  const double mean_gap = 0.5 * (base.async.tau_lo + base.async.tau_hi);
  const double factor = (mean_gap + base.compare.slow_extra) / mean_gap;
  const fs::path dir = fs::temp_directory_path() / "appg_acceptance_compare";
  double worst_appg = 0.0;
  double min_ratio = INFINITY;
  bool all_converged = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentConfig cfg = base;
    cfg.async.seed = seed;
    cfg.objective.seed = base.objective.seed + seed;
    auto c = cmd_compare(cfg, dir);
    all_converged = all_converged && c.appg_status == RunStatus::kConverged;
    worst_appg = std::max(worst_appg, c.appg_dist);
    min_ratio = std::min(min_ratio, c.baseline_dist / std::max(c.appg_dist, 1e-300));
  }
  fs::remove_all(dir);
  return {all_converged && worst_appg <= 1e-6 && min_ratio >= 10.0,
          "slow node gaps x" + fmt("%.1f", factor) + ", worst push-pull dist " + sci(worst_appg) +
              ", smallest baseline/push-pull ratio " + sci(min_ratio)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// 10. Byte-identical outputs across repeated runs of the CLI.
Verdict determinism() {
  const fs::path root = fs::temp_directory_path() / "appg_acceptance_det";
  fs::remove_all(root);
  const std::string cfg = (fs::path(APPG_CONFIG_DIR) / "linear.ini").string();
  int codes[2];
  for (int r = 0; r < 2; ++r) {
    const std::string cmd = std::string(APPG_CLI) + " run " + cfg + " -o " + (root / std::to_string(r)).string() +
                            " > /dev/null 2>&1";
    codes[r] = WEXITSTATUS(std::system(cmd.c_str()));
  }
  const std::string a = slurp(root / "0" / "residuals.csv");
  const bool same = !a.empty() && a == slurp(root / "1" / "residuals.csv") &&
                    slurp(root / "0" / "summary.txt") == slurp(root / "1" / "summary.txt");
  fs::remove_all(root);
  return {codes[0] == 0 && codes[1] == 0 && same,
          "two CLI runs, " + std::to_string(a.size()) + " bytes of residuals, " +
              (same ? "identical" : "different")};
}

std::set<int> parse_list(const std::string& text) {
  std::set<int> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) out.insert(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> expected_failures;
  std::set<int> only;
  for (int a = 1; a < argc; ++a) {
    const std::string arg = argv[a];
    if ((arg == "--expect-fail" || arg == "--only") && a + 1 < argc) {
      (arg == "--only" ? only : expected_failures) = parse_list(argv[++a]);
    } else {
      std::fprintf(stderr, "usage: %s [--expect-fail N,...] [--only N,...]\n", argv[0]);
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"mass conservation", mass_conservation},
      {"synchronous reduction", synchronous_reduction},
      {"augmented replay", augmented_replay},
      {"trace bounds", trace_bounds},
      {"linear convergence", linear_convergence},
      {"PL convergence", pl_convergence},
      {"product contraction", product_contraction_check},
      {"perturbed gradient contraction", perturbed_contraction},
      {"uneven rates", uneven_rates},
      {"determinism", determinism},
  };

  std::set<int> failed;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    const int id = static_cast<int>(c) + 1;
    if (!only.empty() && !only.contains(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[c].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!v.passed) failed.insert(id);
    std::printf("[%s] %d %s: %s [%.1f s]%s\n", v.passed ? "PASS" : "FAIL", id, criteria[c].first.c_str(),
                v.detail.c_str(), seconds, !v.passed && expected_failures.contains(id) ? " (expected)" : "");
    std::fflush(stdout);
  }

  if (!only.empty()) {
    std::erase_if(expected_failures, [&](int id) { return !only.contains(id); });
  }
  const bool ok = failed == expected_failures;
  std::printf("%zu failed; %s\n", failed.size(),
              ok ? "matches the expected outcome" : "does not match the expected outcome");
  return ok ? 0 : 1;
}
