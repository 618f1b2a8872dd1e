#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "appg/engine.hpp"
#include "appg/graph.hpp"
#include "appg/objective.hpp"
#include "appg/trace.hpp"

namespace appg {

struct DelayBounds {
  int b1 = 0;               // (n-1) floor(tau_hi / tau_lo) + 1
  int b2 = 0;               // n floor(delay_max / tau_lo)
  int b = 0;                // b1 + b2
  double coarse_b = 0.0;   // n (tau_hi + delay_max) / tau_lo, for comparison only
};

DelayBounds delay_bounds(int n, double tau_lo, double tau_hi, double delay_max);
// Uses the largest possible gap, slow-node extras included.
DelayBounds delay_bounds(int n, const AsyncConfig& cfg);

class StalenessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Index space of the augmented graph: levels 0..2b, level 0 holds the real
// nodes and level l the copies l events behind. index(l, v) = l n + v, so
// every virtual row points at the row n places before it.
struct AugmentedLayout {
  int n = 0;
  int b = 0;
  int levels() const { return 2 * b + 1; }
  int size() const { return n * levels(); }
  int index(int level, int node) const { return level * n + node; }
};

using SparseMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// A~(k), B~(k) and the active node of event k. I^a(k) is the unit diagonal
// entry at index(0, active).
//
// Row (0, i) of X~ holds the value node i last advertised (its initial
// point before its first update). Row (0, i) of Y~ holds the tracker mass
// sitting in i's buffer, row (l, j) the mass that reaches j's buffer l
// events from now.
struct AugmentedStep {
  SparseMat a;
  SparseMat b;
  int active = 0;
};

// Throws StalenessError when a consumed or in-flight payload sits deeper than
// the 2b levels of the layout.
AugmentedStep build_augmented_matrices(const EventTrace& trace, const DirectedGraph& g,
                                       std::int64_t k, int b);

// Y~(0): the initial broadcasts placed at their arrival levels.
Mat initial_tracker_state(const EventTrace& trace, const DirectedGraph& g, const Mat& y0, int b);

SparseMat activation_indicator(const AugmentedLayout& layout, int active);

struct ReplayReport {
  double max_x_deviation = 0.0;  // vs engine snapshots, infinity norm
  double max_y_deviation = 0.0;
  std::int64_t worst_event = 0;
  double max_mass_residual = 0.0;  // ||1^T Y~(k) - sum_i grad f_i(x_i(k))||_inf
  double max_row_sum_error = 0.0;  // A~(k) 1 = 1
  double max_col_sum_error = 0.0;  // 1^T B~(k) = 1^T
  std::int64_t events = 0;
  std::vector<Mat> x_tilde;  // filled when keep_history is set
  std::vector<Mat> y_tilde;

  double max_deviation() const { return std::max(max_x_deviation, max_y_deviation); }
};

// Iterates
//   Y^(k)   = Y~(k) + grad(k+1) - grad(k)   (only the active row changes)
//   X~(k+1) = A~(k) X~(k) - Gamma I^a(k) Y^(k)
//   Y~(k+1) = B~(k) Y^(k)
// from X~(0) = [X(0); 0] and compares the reconstructed node states with the
// snapshots of a push-pull trace.
ReplayReport replay_augmented(const EventTrace& trace, const DirectedGraph& g, const Objective& obj,
                              const std::vector<double>& stepsizes, int b,
                              bool keep_history = false);

struct ContractionDiagnostics {
  int n_tilde = 0;
  int exponent = 0;               // d_g b
  long double log_theta = 0.0L;   // theta = (1/n_tilde)^(d_g b)
  long double theta = 0.0L;
  long double rho = 0.0L;         // (1 - theta)^(1/(d_g b))
  long double log_neg_log_rho = 0.0L;  // log(-log rho), finite even when rho rounds to 1
  long double log_mu = 0.0L;      // mu = theta^2 / (2 n_tilde)
  long double mu = 0.0L;
  long double t_tilde = 0.0L;     // ceil(log(mu/2) / log rho)

  // 2 rho^t, evaluated in the log domain.
  long double bound(std::int64_t t) const;
};

// Worst-case constants; for any realistic b they are astronomically loose.
ContractionDiagnostics theoretical_constants(int n, int diameter, int b);

struct ProductGap {
  std::int64_t k0 = 0;
  int t = 0;
  double gap_a = 0.0;  // ||Phi^A - 1 phi^T||_F, phi the column mean
  double gap_b = 0.0;  // ||Phi^B - phi 1^T||_F, phi the row mean
  long double bound = 0.0L;
  bool asserted = false;  // t >= d_g b
  bool holds = true;
};

struct ContractionReport {
  ContractionDiagnostics constants;
  std::vector<ProductGap> gaps;
  // Smallest row sum over original columns of Phi^B_t(0), rows i in V, t = 1..t_max.
  std::vector<double> min_row_sums;
  long double row_sum_threshold = 0.0L;  // n theta
  int violations = 0;
  int row_sum_violations = 0;
  // Smallest t from which every sampled gap stays within 2 rho^t, or -1.
  int first_t_within_bound = -1;
};

// Products Phi_t(k0) = M(k0+t-1) ... M(k0) for t = 1..t_max at `samples`
// evenly spaced k0.
ContractionReport product_contraction(const EventTrace& trace, const DirectedGraph& g, int b,
                                      int t_max, int samples = 10);

// p^{lambda,k} = max_{0<=t<=k} p(t) / lambda^t.
std::vector<double> lambda_sequence(const std::vector<double>& p, double lambda);

struct TraceBoundReport {
  DelayBounds bounds;
  std::int64_t windows_checked = 0;
  std::int64_t window_violations = 0;
  std::int64_t max_activation_gap = 0;  // events between consecutive updates of a node
  std::int64_t deliveries_checked = 0;
  std::int64_t delivery_violations = 0;
  std::int64_t consumptions_checked = 0;
  std::int64_t staleness_violations = 0;
  std::int64_t max_staleness = 0;  // consuming event minus send index
  std::string first_violation;

  std::int64_t violations() const {
    return window_violations + delivery_violations + staleness_violations;
  }
};

// Every window of b1 consecutive events activates every node; a payload sent
// at event s is delivered no later than event s + b2 and consumed by event
// s + b. Windows that run past the end of the trace are skipped.
TraceBoundReport check_trace_bounds(const EventTrace& trace, const DelayBounds& bounds);

// One "A k row col value" or "B k row col value" line per nonzero of
// A~(k), B~(k) for k in [first, last).
void write_triplets(const EventTrace& trace, const DirectedGraph& g, int b, std::int64_t first,
                    std::int64_t last, std::ostream& out);

}  // namespace appg
