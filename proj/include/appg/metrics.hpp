#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "appg/objective.hpp"
#include "appg/trace.hpp"

namespace appg {

// Entry k describes the state right after event k.
struct ResidualSeries {
  std::vector<std::int64_t> k;
  std::vector<double> time;
  std::vector<double> consensus_error;  // max_i ||x_i - mean x||
  std::vector<double> tracker_norm;     // max_i ||y_i||
  std::vector<std::optional<double>> opt_gap;      // f(mean x) - f*
  std::vector<std::optional<double>> dist_to_opt;  // ||mean x - x*||

  std::size_t size() const { return k.size(); }
};

// Needs snapshots. Optimality columns stay empty when the objective does not
// know f* or x*.
ResidualSeries compute_residuals(const EventTrace& trace, const Objective& obj);

// Appends the row for event k from the node states (rows of x and y).
void append_residual(ResidualSeries& series, std::int64_t k, double time, const Mat& x, const Mat& y,
                     const Objective& obj);

struct RateFit {
  double lambda = 0.0;  // exp(slope)
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int points = 0;
};

// Least squares of log p(k) against k over entries past the burn-in fraction
// that exceed `floor`. Throws std::invalid_argument with fewer than 10 usable
// points.
RateFit fit_linear_rate(const std::vector<double>& series, double burn_in = 0.2,
                        double floor = 1e-12);

// Shortest round-trip decimal form (17 significant digits).
std::string format_double(double v);

// Header `k,time,consensus_error,tracker_norm,opt_gap,dist_to_opt`, one row per
// event; unknown optimality values are left empty.
void export_csv(const ResidualSeries& series, std::ostream& out);
void export_csv(const ResidualSeries& series, const std::filesystem::path& path);
ResidualSeries read_residual_csv(std::istream& in);
ResidualSeries read_residual_csv(const std::filesystem::path& path);

}  // namespace appg
