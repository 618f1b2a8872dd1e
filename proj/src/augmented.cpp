#include "appg/augmented.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>
#include <string>
#include <tuple>

#include "appg/reference.hpp"

namespace appg {

namespace {

// Tolerates representation error in ratios such as 0.3 / 0.1.
int floor_ratio(double num, double den) { return static_cast<int>(std::floor(num / den + 1e-9)); }

using Triplet = Eigen::Triplet<double>;

std::string describe(std::int64_t k, const char* what, std::int64_t level, int b) {
  return "event " + std::to_string(k) + ": " + what + " at level " + std::to_string(level) +
         " exceeds 2b = " + std::to_string(2 * b);
}

}  // namespace

DelayBounds delay_bounds(int n, double tau_lo, double tau_hi, double delay_max) {
  if (n < 1) throw std::invalid_argument("n must be positive");
  if (!(tau_lo > 0.0)) throw std::invalid_argument("tau_lo must be positive");
  DelayBounds out;
  out.b1 = (n - 1) * floor_ratio(tau_hi, tau_lo) + 1;
  out.b2 = n * floor_ratio(delay_max, tau_lo);
  out.b = out.b1 + out.b2;
  out.coarse_b = n * (tau_hi + delay_max) / tau_lo;
  return out;
}

DelayBounds delay_bounds(int n, const AsyncConfig& cfg) {
  return delay_bounds(n, cfg.tau_lo, cfg.max_gap(), cfg.delay_max);
}

AugmentedStep build_augmented_matrices(const EventTrace& trace, const DirectedGraph& g,
                                       std::int64_t k, int b) {
  if (k < 0 || k >= trace.size()) throw std::out_of_range("event index outside the trace");
  const AugmentedLayout layout{trace.n, b};
  const int n = layout.n;
  const int top = layout.levels() - 1;
  const std::int64_t total = trace.size();
  const EventRecord& ev = trace.events[k];
  const int i = ev.node;

  std::vector<Triplet> a;
  std::vector<Triplet> bt;
  a.reserve(layout.size() + ev.consumed.size());
  bt.reserve(layout.size() + ev.sent.size());
  for (int v = 0; v < n; ++v) {
    if (v == i) continue;
    a.emplace_back(v, v, 1.0);
    bt.emplace_back(v, v, 1.0);
  }
  for (const auto& c : ev.consumed) {
    const std::int64_t level = k - c.send_index - 1;
    if (level < 0 || level > top) {
      throw StalenessError(describe(k, ("payload from node " + std::to_string(c.sender)).c_str(),
                                    level, b));
    }
    a.emplace_back(i, layout.index(static_cast<int>(level), c.sender), c.weight);
  }
  const double share = 1.0 / static_cast<double>(g.out_neighbors(i).size());
  if (ev.sent.size() != g.out_neighbors(i).size()) {
    throw std::invalid_argument("event " + std::to_string(k) + ": broadcast does not match the graph");
  }
  for (const auto& d : ev.sent) {
    const std::int64_t level = d.arrive_index == kPending ? total - k : d.arrive_index - (k + 1);
    if (level < 0 || level > top) {
      throw StalenessError(describe(k, ("delivery to node " + std::to_string(d.receiver)).c_str(),
                                    level, b));
    }
    bt.emplace_back(layout.index(static_cast<int>(level), d.receiver), i, share);
  }
  for (int l = 1; l <= top; ++l) {
    for (int v = 0; v < n; ++v) {
      a.emplace_back(layout.index(l, v), layout.index(l - 1, v), 1.0);
      bt.emplace_back(layout.index(l - 1, v), layout.index(l, v), 1.0);
    }
  }

  AugmentedStep step;
  step.active = i;
  step.a.resize(layout.size(), layout.size());
  step.b.resize(layout.size(), layout.size());
  step.a.setFromTriplets(a.begin(), a.end());
  step.b.setFromTriplets(bt.begin(), bt.end());
  return step;
}

Mat initial_tracker_state(const EventTrace& trace, const DirectedGraph& g, const Mat& y0, int b) {
  const AugmentedLayout layout{trace.n, b};
  const int top = layout.levels() - 1;
  Mat y = Mat::Zero(layout.size(), y0.cols());
  for (int i = 0; i < trace.n; ++i) {
    const double share = 1.0 / static_cast<double>(g.out_neighbors(i).size());
    for (const auto& d : trace.initial_sends[i]) {
      const std::int64_t level = d.arrive_index == kPending ? trace.size() + 1 : d.arrive_index;
      if (level > top) throw StalenessError(describe(-1, "initial delivery", level, b));
      y.row(layout.index(static_cast<int>(level), d.receiver)) += share * y0.row(i);
    }
  }
  return y;
}

SparseMat activation_indicator(const AugmentedLayout& layout, int active) {
  SparseMat m(layout.size(), layout.size());
  m.insert(active, active) = 1.0;
  m.makeCompressed();
  return m;
}

ReplayReport replay_augmented(const EventTrace& trace, const DirectedGraph& g, const Objective& obj,
                              const std::vector<double>& stepsizes, int b, bool keep_history) {
  if (!trace.has_snapshots()) throw std::invalid_argument("replay needs a trace with snapshots");
  if (static_cast<int>(stepsizes.size()) != trace.n) {
    throw std::invalid_argument("one stepsize per node");
  }
  const AugmentedLayout layout{trace.n, b};
  const int n = trace.n;
  const Eigen::Index m = trace.dim;

  Mat x_node = trace.x_snapshots.front();
  Mat y_node = trace.y_snapshots.front();
  Mat grad = stacked_gradient(obj, x_node);
  Mat x_tilde = Mat::Zero(layout.size(), m);
  x_tilde.topRows(n) = x_node;
  Mat y_tilde = initial_tracker_state(trace, g, y_node, b);

  ReplayReport report;
  report.events = trace.size();
  auto compare = [&](std::int64_t k) {
    const double dx = (x_node - trace.x_snapshots[k]).lpNorm<Eigen::Infinity>();
    const double dy = (y_node - trace.y_snapshots[k]).lpNorm<Eigen::Infinity>();
    if (std::max(dx, dy) > report.max_deviation()) report.worst_event = k;
    report.max_x_deviation = std::max(report.max_x_deviation, dx);
    report.max_y_deviation = std::max(report.max_y_deviation, dy);
    const double mass = (y_tilde.colwise().sum() - grad.colwise().sum()).lpNorm<Eigen::Infinity>();
    report.max_mass_residual = std::max(report.max_mass_residual, mass);
    if (keep_history) {
      report.x_tilde.push_back(x_tilde);
      report.y_tilde.push_back(y_tilde);
    }
  };

  const Vec ones = Vec::Ones(layout.size());
  for (std::int64_t k = 0; k < trace.size(); ++k) {
    compare(k);
    const AugmentedStep step = build_augmented_matrices(trace, g, k, b);
    report.max_row_sum_error =
        std::max(report.max_row_sum_error, (step.a * ones - ones).lpNorm<Eigen::Infinity>());
    report.max_col_sum_error = std::max(
        report.max_col_sum_error, (step.b.transpose() * ones - ones).lpNorm<Eigen::Infinity>());

    const int i = step.active;
    Mat ax = step.a * x_tilde;
    const Vec x_new = ax.row(i).transpose();
    const Vec g_new = obj.component_gradient(i, x_new);
    Mat y_hat = y_tilde;
    y_hat.row(i) += g_new.transpose() - grad.row(i);
    ax.row(i) -= stepsizes[i] * y_hat.row(i);
    x_tilde = std::move(ax);
    x_node.row(i) = x_new.transpose();
    y_node.row(i) = y_hat.row(i);
    grad.row(i) = g_new.transpose();
    y_tilde = step.b * y_hat;
  }
  compare(trace.size());
  return report;
}

long double ContractionDiagnostics::bound(std::int64_t t) const {
  return 2.0L * std::exp(-static_cast<long double>(t) * std::exp(log_neg_log_rho));
}

ContractionDiagnostics theoretical_constants(int n, int diameter, int b) {
  if (n < 1 || diameter < 1 || b < 1) throw std::invalid_argument("n, diameter and b must be positive");
  ContractionDiagnostics c;
  c.n_tilde = n * (2 * b + 1);
  c.exponent = diameter * b;
  const long double log_n_tilde = std::log(static_cast<long double>(c.n_tilde));
  c.log_theta = -c.exponent * log_n_tilde;
  c.theta = std::exp(c.log_theta);
  // -log(1 - theta) equals theta to full precision once theta is tiny.
  c.log_neg_log_rho = c.theta > 1e-18L ? std::log(-std::log1p(-c.theta) / c.exponent)
                                       : c.log_theta - std::log(static_cast<long double>(c.exponent));
  c.rho = std::exp(-std::exp(c.log_neg_log_rho));
  c.log_mu = 2.0L * c.log_theta - std::log(2.0L * c.n_tilde);
  c.mu = std::exp(c.log_mu);
  const long double log_half_mu = c.log_mu - std::log(2.0L);
  c.t_tilde = std::ceil(std::exp(std::log(-log_half_mu) - c.log_neg_log_rho));
  return c;
}

ContractionReport product_contraction(const EventTrace& trace, const DirectedGraph& g, int b,
                                      int t_max, int samples) {
  if (t_max < 1 || samples < 1) throw std::invalid_argument("t_max and samples must be positive");
  if (trace.size() < t_max) throw std::invalid_argument("trace shorter than t_max");
  const AugmentedLayout layout{trace.n, b};
  const int size = layout.size();
  const int n = trace.n;

  ContractionReport report;
  report.constants = theoretical_constants(n, diameter(g), b);
  const int asserted_from = report.constants.exponent;
  const std::int64_t span = trace.size() - t_max;

  std::vector<double> worst(t_max + 1, 0.0);
  for (int s = 0; s < samples; ++s) {
    const std::int64_t k0 = samples == 1 ? 0 : s * span / (samples - 1);
    Mat phi_a = Mat::Identity(size, size);
    Mat phi_b = Mat::Identity(size, size);
    for (int t = 1; t <= t_max; ++t) {
      const AugmentedStep step = build_augmented_matrices(trace, g, k0 + t - 1, b);
      phi_a = step.a * phi_a;
      phi_b = step.b * phi_b;
      ProductGap gap;
      gap.k0 = k0;
      gap.t = t;
      const Eigen::RowVectorXd col_mean = phi_a.colwise().mean();
      gap.gap_a = (phi_a.rowwise() - col_mean).norm();
      const Vec row_mean = phi_b.rowwise().mean();
      gap.gap_b = (phi_b.colwise() - row_mean).norm();
      gap.bound = report.constants.bound(t);
      gap.asserted = t >= asserted_from;
      const bool within = gap.gap_a <= gap.bound && gap.gap_b <= gap.bound;
      gap.holds = !gap.asserted || within;
      if (!gap.holds) ++report.violations;
      worst[t] = std::max({worst[t], gap.gap_a, gap.gap_b});
      report.gaps.push_back(gap);
    }
  }
  for (int t = t_max; t >= 1 && worst[t] <= report.constants.bound(t); --t) {
    report.first_t_within_bound = t;
  }

  report.row_sum_threshold = n * report.constants.theta;
  Mat phi = Mat::Identity(size, size);
  for (int t = 1; t <= t_max; ++t) {
    phi = build_augmented_matrices(trace, g, t - 1, b).b * phi;
    const double row_min = phi.topLeftCorner(n, n).rowwise().sum().minCoeff();
    report.min_row_sums.push_back(row_min);
    if (row_min < report.row_sum_threshold) ++report.row_sum_violations;
  }
  return report;
}

std::vector<double> lambda_sequence(const std::vector<double>& p, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("lambda must lie in (0, 1)");
  std::vector<double> out;
  out.reserve(p.size());
  double running = 0.0;
  const double log_lambda = std::log(lambda);
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (!(p[t] >= 0.0)) throw std::invalid_argument("lambda sequence needs a nonnegative series");
    running = std::max(running, p[t] * std::exp(-static_cast<double>(t) * log_lambda));
    out.push_back(running);
  }
  return out;
}

TraceBoundReport check_trace_bounds(const EventTrace& trace, const DelayBounds& bounds) {
  TraceBoundReport report;
  report.bounds = bounds;
  const std::int64_t total = trace.size();
  auto flag = [&](std::int64_t& counter, const std::string& what) {
    ++counter;
    if (report.first_violation.empty()) report.first_violation = what;
  };

  // Activation windows.
  std::vector<std::int64_t> last(trace.n, -1);
  for (const auto& ev : trace.events) {
    const std::int64_t gap = ev.k - last[ev.node];
    report.max_activation_gap = std::max(report.max_activation_gap, gap);
    if (gap > bounds.b1) {
      flag(report.window_violations, "node " + std::to_string(ev.node) + " idle for " +
                                         std::to_string(gap) + " events before event " +
                                         std::to_string(ev.k));
    }
    last[ev.node] = ev.k;
  }
  for (int v = 0; v < trace.n; ++v) {
    if (total - last[v] > bounds.b1) {
      flag(report.window_violations,
           "node " + std::to_string(v) + " idle over the last " + std::to_string(total - last[v] - 1) +
               " events");
    }
  }
  report.windows_checked = std::max<std::int64_t>(0, total - bounds.b1 + 1);

  // Consumption staleness.
  std::set<std::tuple<int, int, std::int64_t>> consumed;
  for (const auto& ev : trace.events) {
    for (const auto& c : ev.consumed) {
      consumed.emplace(ev.node, c.sender, c.send_index);
      const std::int64_t stale = ev.k - c.send_index;
      ++report.consumptions_checked;
      report.max_staleness = std::max(report.max_staleness, stale);
      if (stale > bounds.b) {
        flag(report.staleness_violations, "event " + std::to_string(ev.k) + " used a payload from event " +
                                              std::to_string(c.send_index));
      }
    }
  }

  // Delivery deadlines and unconsumed payloads.
  auto time_of = [&](std::int64_t s) { return s < 0 ? 0.0 : trace.events[s].time; };
  auto check_sends = [&](int sender, std::int64_t s, const std::vector<Delivery>& sent) {
    for (const auto& d : sent) {
      if (d.receiver != sender && s + bounds.b2 < total) {
        const double deadline = time_of(s + bounds.b2);
        ++report.deliveries_checked;
        if (d.deliver_time > deadline + 1e-9 * (1.0 + std::abs(deadline))) {
          flag(report.delivery_violations, "payload of event " + std::to_string(s) + " to node " +
                                               std::to_string(d.receiver) + " delivered late");
        }
      }
      if (s + bounds.b < total && !consumed.contains({d.receiver, sender, s})) {
        flag(report.staleness_violations, "payload of event " + std::to_string(s) + " to node " +
                                              std::to_string(d.receiver) + " never used");
      }
    }
  };
  for (int i = 0; i < trace.n; ++i) check_sends(i, kInitialSend, trace.initial_sends[i]);
  for (const auto& ev : trace.events) check_sends(ev.node, ev.k, ev.sent);
  return report;
}

void write_triplets(const EventTrace& trace, const DirectedGraph& g, int b, std::int64_t first,
                    std::int64_t last, std::ostream& out) {
  char buf[128];
  auto emit = [&](char tag, std::int64_t k, const SparseMat& m) {
    for (int r = 0; r < m.outerSize(); ++r) {
      for (SparseMat::InnerIterator it(m, r); it; ++it) {
        std::snprintf(buf, sizeof buf, "%c %lld %d %d %.17g\n", tag, static_cast<long long>(k), r,
                      static_cast<int>(it.col()), it.value());
        out << buf;
      }
    }
  };
  for (std::int64_t k = first; k < last; ++k) {
    const AugmentedStep step = build_augmented_matrices(trace, g, k, b);
    emit('A', k, step.a);
    emit('B', k, step.b);
  }
}

}  // namespace appg
