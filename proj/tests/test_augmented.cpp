#include <doctest.h>

#include <cmath>
#include <sstream>

#include "appg/augmented.hpp"
#include "appg/reference.hpp"

using namespace appg;

namespace {

struct Run {
  DirectedGraph g;
  std::shared_ptr<QuadraticObjective> obj;
  std::vector<double> gammas;
  SimulationResult res;
  DelayBounds bounds;
};

Run random_run(TopologyKind kind, int n, std::uint64_t seed, std::int64_t events,
               double tau_hi = 2.0, double delay = 2.0) {
  auto g = build_topology(kind, n);
  auto obj = make_quadratic(n, 2, seed, 6.0);
  AsyncConfig cfg;
  cfg.tau_lo = 1.0;
  cfg.tau_hi = tau_hi;
  cfg.delay_max = delay;
  cfg.seed = seed;
  std::vector<double> gammas(n, 0.04);
  std::srand(static_cast<unsigned>(seed));
  std::vector<Vec> init;
  for (int i = 0; i < n; ++i) init.push_back(Vec::Random(2));
  auto res = run_simulation(g, obj, cfg, gammas, init, Horizon{events, std::nullopt});
  return {g, obj, gammas, std::move(res), delay_bounds(n, cfg)};
}

Mat dense(const SparseMat& m) { return Mat(m); }

}  // namespace

TEST_CASE("delay bounds") {
  auto b = delay_bounds(3, 1.0, 2.0, 1.0);
  CHECK(b.b1 == 5);
  CHECK(b.b2 == 3);
  CHECK(b.b == 8);
  CHECK(b.coarse_b == doctest::Approx(9.0));
  CHECK(delay_bounds(4, 1.0, 1.0, 0.0).b == 4);
  CHECK(delay_bounds(1, 1.0, 3.0, 2.0).b1 == 1);
  CHECK(delay_bounds(1, 1.0, 3.0, 2.0).b2 == 2);
  CHECK(delay_bounds(5, 0.1, 0.3, 0.0).b1 == 4 * 3 + 1);

  AsyncConfig cfg;
  cfg.tau_hi = 2.0;
  cfg.slow_nodes[0] = 2.0;
  CHECK(delay_bounds(3, cfg).b1 == 2 * 4 + 1);
}

TEST_CASE("layout indexing") {
  AugmentedLayout layout{3, 2};
  CHECK(layout.levels() == 5);
  CHECK(layout.size() == 15);
  CHECK(layout.index(0, 2) == 2);
  CHECK(layout.index(4, 1) == 13);
}

TEST_CASE("theoretical constants") {
  auto c = theoretical_constants(3, 1, 8);
  CHECK(c.n_tilde == 51);
  CHECK(c.exponent == 8);
  CHECK(c.log_theta == doctest::Approx(-8.0 * std::log(51.0)));
  const long double theta = std::pow(51.0L, -8.0L);
  CHECK(static_cast<double>(c.theta / theta) == doctest::Approx(1.0));
  const long double log_rho = std::log1p(-theta) / 8.0L;
  CHECK(static_cast<double>(c.log_neg_log_rho) == doctest::Approx(std::log(-static_cast<double>(log_rho))));
  // t~ is the first t with 2 rho^t <= mu.
  const long double t = c.t_tilde;
  CHECK(2.0L * std::exp(t * log_rho) <= c.mu * (1.0L + 1e-12L));
  CHECK(2.0L * std::exp((t - 1.0L) * log_rho) > c.mu);
  CHECK(static_cast<double>(c.bound(0)) == doctest::Approx(2.0));

  auto tiny = theoretical_constants(1, 1, 1);
  CHECK(tiny.n_tilde == 3);
  CHECK(static_cast<double>(tiny.theta) == doctest::Approx(1.0 / 3.0));
  CHECK(static_cast<double>(tiny.mu) == doctest::Approx(1.0 / 54.0));
  CHECK(static_cast<double>(tiny.t_tilde) == 12.0);
  CHECK(static_cast<double>(tiny.bound(3)) == doctest::Approx(2.0 * 8.0 / 27.0));
}

TEST_CASE("augmented matrices have the prescribed structure") {
  auto run = random_run(TopologyKind::kLog, 4, 3, 200);
  const int n = 4;
  const int b = run.bounds.b;
  AugmentedLayout layout{n, b};
  for (std::int64_t k = 0; k < run.res.trace.size(); ++k) {
    const auto& ev = run.res.trace.events[k];
    auto step = build_augmented_matrices(run.res.trace, run.g, k, b);
    CHECK(step.active == ev.node);
    Mat a = dense(step.a);
    Mat bm = dense(step.b);
    REQUIRE(a.rows() == layout.size());
    CHECK((a.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-14);
    CHECK((bm.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-14);
    CHECK(a.minCoeff() >= 0.0);
    CHECK(bm.minCoeff() >= 0.0);

    // Active row: weight of each consumed payload at its age level.
    for (const auto& c : ev.consumed) {
      const std::int64_t level = k - c.send_index - 1;
      CHECK(a(layout.index(0, ev.node), layout.index(static_cast<int>(level), c.sender)) ==
            doctest::Approx(c.weight));
    }
    // Inactive real rows and columns are identity; virtual rows shift by one level.
    for (int v = 0; v < n; ++v) {
      if (v == ev.node) continue;
      CHECK(a(v, v) == 1.0);
      CHECK(bm(v, v) == 1.0);
    }
    for (int l = 1; l < layout.levels(); ++l) {
      for (int v = 0; v < n; ++v) {
        const int r = layout.index(l, v);
        CHECK(a(r, layout.index(l - 1, v)) == 1.0);
        CHECK(bm(layout.index(l - 1, v), r) == 1.0);
      }
    }
    // Active column splits the tracker over the out-neighbors.
    const double share = 1.0 / static_cast<double>(run.g.out_neighbors(ev.node).size());
    for (const auto& d : ev.sent) {
      const std::int64_t level = d.arrive_index == kPending ? run.res.trace.size() - k
                                                            : d.arrive_index - (k + 1);
      CHECK(bm(layout.index(static_cast<int>(level), d.receiver), ev.node) == doctest::Approx(share));
    }
  }
}

TEST_CASE("lockstep rows fold onto the synchronous weights") {
  const int n = 5;
  auto g = build_topology(TopologyKind::kLog, n);
  auto obj = make_quadratic(n, 1, 2, 4.0);
  auto res = run_simulation(g, obj, AsyncConfig::lockstep(), std::vector<double>(n, 0.05),
                            std::vector<Vec>(n, Vec::Ones(1)), Horizon{n * 20, std::nullopt});
  auto sys = make_sync_system(g, std::vector<double>(n, 0.05));
  const int b = delay_bounds(n, AsyncConfig::lockstep()).b;
  for (std::int64_t k = n; k < res.trace.size(); ++k) {
    auto step = build_augmented_matrices(res.trace, g, k, b);
    Mat a = dense(step.a);
    Vec folded = Vec::Zero(n);
    for (int l = 0; l < 2 * b + 1; ++l) folded += a.block(step.active, l * n, 1, n).transpose();
    CHECK((folded - sys.a.row(step.active).transpose()).lpNorm<Eigen::Infinity>() < 1e-15);
  }
}

TEST_CASE("augmented replay reproduces the engine") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto run = random_run(TopologyKind::kLog, 5, seed, 400);
    auto rep = replay_augmented(run.res.trace, run.g, *run.obj, run.gammas, run.bounds.b);
    CAPTURE(seed);
    CHECK(rep.events == 400);
    CHECK(rep.max_deviation() < 1e-10);
    CHECK(rep.max_mass_residual < 1e-10);
    CHECK(rep.max_row_sum_error < 1e-14);
    CHECK(rep.max_col_sum_error < 1e-14);
  }
}

TEST_CASE("initial tracker state holds all initial mass") {
  auto run = random_run(TopologyKind::kRing, 4, 5, 50);
  const Mat& y0 = run.res.trace.y_snapshots.front();
  Mat yt = initial_tracker_state(run.res.trace, run.g, y0, run.bounds.b);
  CHECK(yt.rows() == AugmentedLayout{4, run.bounds.b}.size());
  CHECK((yt.colwise().sum() - y0.colwise().sum()).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("corrupted traces are detected") {
  auto run = random_run(TopologyKind::kFully, 4, 7, 300);
  EventTrace bad = run.res.trace;
  // Point a consumed payload at an older event from the same sender.
  bool mutated = false;
  for (auto& ev : bad.events) {
    if (ev.k < 100) continue;
    for (auto& c : ev.consumed) {
      if (c.sender != ev.node && c.send_index > 0) {
        for (std::int64_t s = c.send_index - 1; s >= 0; --s) {
          if (bad.events[s].node == c.sender) {
            c.send_index = s;
            mutated = true;
            break;
          }
        }
      }
      if (mutated) break;
    }
    if (mutated) break;
  }
  REQUIRE(mutated);
  bool caught = false;
  try {
    auto rep = replay_augmented(bad, run.g, *run.obj, run.gammas, run.bounds.b);
    caught = rep.max_deviation() > 1e-8;
  } catch (const StalenessError&) {
    caught = true;
  }
  CHECK(caught);

  // A layout too shallow for the observed staleness.
  CHECK_THROWS_AS(replay_augmented(run.res.trace, run.g, *run.obj, run.gammas, 1), StalenessError);
}

TEST_CASE("trace bounds hold for integer ratios") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto run = random_run(TopologyKind::kLog, 6, seed, 3000, 2.0, 2.0);
    auto rep = check_trace_bounds(run.res.trace, run.bounds);
    CAPTURE(rep.first_violation);
    CHECK(rep.violations() == 0);
    CHECK(rep.max_activation_gap <= run.bounds.b1);
    CHECK(rep.max_staleness <= run.bounds.b);
    CHECK(rep.deliveries_checked > 0);
  }
}

TEST_CASE("trace bound checker flags an idle node") {
  EventTrace tr;
  tr.n = 2;
  tr.dim = 1;
  tr.initial_sends.assign(2, {});
  for (int k = 0; k < 10; ++k) tr.events.push_back({k, 1.0 + k, 0, {}, {}});
  auto rep = check_trace_bounds(tr, delay_bounds(2, 1.0, 1.0, 0.0));
  CHECK(rep.window_violations > 0);
  CHECK_FALSE(rep.first_violation.empty());
}

TEST_CASE("product contraction diagnostics") {
  auto run = random_run(TopologyKind::kFully, 3, 4, 300, 1.0, 1.0);
  CHECK(run.bounds.b == 6);
  auto rep = product_contraction(run.res.trace, run.g, run.bounds.b, 30, 4);
  CHECK(rep.constants.n_tilde == 39);
  CHECK(rep.gaps.size() == 4 * 30);
  CHECK(rep.row_sum_violations == 0);
  CHECK(rep.first_t_within_bound > 0);
  for (const auto& gp : rep.gaps) {
    CHECK(gp.gap_a >= 0.0);
    CHECK(gp.asserted == (gp.t >= rep.constants.exponent));
  }
  // Long products are numerically rank one.
  for (const auto& gp : rep.gaps) {
    if (gp.t == 30) {
      CHECK(gp.gap_a < 1e-3);
      CHECK(gp.gap_b < 1e-3);
    }
  }
}

TEST_CASE("lambda sequence") {
  auto seq = lambda_sequence({1.0, 0.5, 0.25, 0.125}, 0.5);
  for (double v : seq) CHECK(v == doctest::Approx(1.0));
  auto grow = lambda_sequence({1.0, 0.9, 0.81}, 0.5);
  CHECK(grow[1] == doctest::Approx(1.8));
  CHECK(grow[2] == doctest::Approx(3.24));
  auto peak = lambda_sequence({4.0, 0.0, 0.0}, 0.9);
  CHECK(peak[2] == 4.0);
  CHECK_THROWS(lambda_sequence({1.0}, 1.0));
  CHECK_THROWS(lambda_sequence({-1.0}, 0.5));
}

TEST_CASE("triplet export") {
  auto run = random_run(TopologyKind::kRing, 3, 2, 20);
  std::ostringstream out;
  write_triplets(run.res.trace, run.g, run.bounds.b, 0, 2, out);
  std::istringstream in(out.str());
  char tag = 0;
  long long k = 0;
  int r = 0;
  int c = 0;
  double v = 0.0;
  Mat a0 = Mat::Zero(AugmentedLayout{3, run.bounds.b}.size(), AugmentedLayout{3, run.bounds.b}.size());
  int lines = 0;
  while (in >> tag >> k >> r >> c >> v) {
    ++lines;
    if (tag == 'A' && k == 0) a0(r, c) = v;
  }
  CHECK(lines > 0);
  CHECK(a0 == dense(build_augmented_matrices(run.res.trace, run.g, 0, run.bounds.b).a));
}
