#include "appg/metrics.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "appg/errors.hpp"

namespace appg {

void append_residual(ResidualSeries& s, std::int64_t k, double time, const Mat& x, const Mat& y,
                     const Objective& obj) {
  const auto& meta = obj.metadata();
  const Vec mean = x.colwise().mean().transpose();
  s.k.push_back(k);
  s.time.push_back(time);
  s.consensus_error.push_back((x.rowwise() - mean.transpose()).rowwise().norm().maxCoeff());
  s.tracker_norm.push_back(y.rowwise().norm().maxCoeff());
  s.opt_gap.push_back(meta.f_star ? std::optional(std::max(0.0, obj.value(mean) - *meta.f_star))
                                  : std::nullopt);
  s.dist_to_opt.push_back(meta.x_star ? std::optional((mean - *meta.x_star).norm()) : std::nullopt);
}

ResidualSeries compute_residuals(const EventTrace& trace, const Objective& obj) {
  if (!trace.has_snapshots()) throw std::invalid_argument("residuals need a trace with snapshots");
  ResidualSeries s;
  for (std::int64_t k = 0; k < trace.size(); ++k) {
    append_residual(s, k, trace.events[k].time, trace.x_snapshots[k + 1], trace.y_snapshots[k + 1], obj);
  }
  return s;
}

RateFit fit_linear_rate(const std::vector<double>& series, double burn_in, double floor) {
  if (!(burn_in >= 0.0 && burn_in < 1.0)) throw std::invalid_argument("burn-in must lie in [0, 1)");
  const auto start = static_cast<std::size_t>(std::floor(burn_in * static_cast<double>(series.size())));
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
  int count = 0;
  for (std::size_t k = start; k < series.size(); ++k) {
    if (!(series[k] > floor) || !std::isfinite(series[k])) continue;
    const double x = static_cast<double>(k);
    const double y = std::log(series[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
    ++count;
  }
  if (count < 10) {
    throw std::invalid_argument("rate fit needs at least 10 points above the floor, got " +
                                std::to_string(count));
  }
  const double c = count;
  const double vxx = sxx - sx * sx / c;
  const double vxy = sxy - sx * sy / c;
  const double vyy = syy - sy * sy / c;
  RateFit fit;
  fit.points = count;
  fit.slope = vxy / vxx;
  fit.intercept = (sy - fit.slope * sx) / c;
  fit.lambda = std::exp(fit.slope);
  // A flat series is fitted exactly.
  fit.r_squared = vyy <= 0.0 ? 1.0 : std::min(1.0, vxy * vxy / (vxx * vyy));
  return fit;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void export_csv(const ResidualSeries& s, std::ostream& out) {
  out << "k,time,consensus_error,tracker_norm,opt_gap,dist_to_opt\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (std::size_t r = 0; r < s.size(); ++r) {
    out << s.k[r] << ',' << format_double(s.time[r]) << ',' << format_double(s.consensus_error[r])
        << ',' << format_double(s.tracker_norm[r]) << ',' << opt(s.opt_gap[r]) << ','
        << opt(s.dist_to_opt[r]) << '\n';
  }
}

void export_csv(const ResidualSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  export_csv(series, out);
  if (!out) throw IoError("write failure on " + path.string());
}

namespace {

double parse_number(std::string_view text, int line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument("residual csv line " + std::to_string(line) + ": bad number '" +
                                std::string(text) + "'");
  }
  return v;
}

}  // namespace

ResidualSeries read_residual_csv(std::istream& in) {
  ResidualSeries s;
  std::string line;
  if (!std::getline(in, line) || line != "k,time,consensus_error,tracker_norm,opt_gap,dist_to_opt") {
    throw std::invalid_argument("residual csv: missing header");
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<std::string_view> cells;
    std::string_view rest = line;
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1)) {
      cells.push_back(rest.substr(0, pos));
    }
    cells.push_back(rest);
    if (cells.size() != 6) {
      throw std::invalid_argument("residual csv line " + std::to_string(line_no) + ": expected 6 fields");
    }
    auto opt = [&](std::string_view cell) {
      return cell.empty() ? std::nullopt : std::optional(parse_number(cell, line_no));
    };
    s.k.push_back(static_cast<std::int64_t>(parse_number(cells[0], line_no)));
    s.time.push_back(parse_number(cells[1], line_no));
    s.consensus_error.push_back(parse_number(cells[2], line_no));
    s.tracker_norm.push_back(parse_number(cells[3], line_no));
    s.opt_gap.push_back(opt(cells[4]));
    s.dist_to_opt.push_back(opt(cells[5]));
  }
  return s;
}

ResidualSeries read_residual_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_residual_csv(in);
}

}  // namespace appg
