#include "appg/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "appg/errors.hpp"

namespace appg {

std::vector<std::pair<int, int>> contiguous_partition(int rows, int parts) {
  if (parts < 1) throw std::invalid_argument("need at least one partition");
  if (rows < 0) throw std::invalid_argument("negative row count");
  std::vector<std::pair<int, int>> out;
  const int base = rows / parts;
  const int extra = rows % parts;
  int begin = 0;
  for (int p = 0; p < parts; ++p) {
    const int size = base + (p < extra ? 1 : 0);
    out.emplace_back(begin, begin + size);
    begin += size;
  }
  return out;
}

std::vector<bool> detect_categorical(const Eigen::MatrixXd& features) {
  std::vector<bool> mask(features.cols(), false);
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    std::set<double> distinct;
    for (Eigen::Index r = 0; r < features.rows() && distinct.size() <= 2; ++r) {
      distinct.insert(features(r, c));
    }
    mask[c] = distinct.size() == 2;
  }
  return mask;
}

void normalize_columns(Eigen::MatrixXd& features, const std::vector<bool>& categorical) {
  if (features.rows() == 0) return;
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    if (categorical[c]) continue;
    auto col = features.col(c);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().mean();
    const double sd = std::sqrt(var);
    const double divisor = sd > 0.0 ? sd : 1.0;
    col = (col.array() - mean) / divisor;
  }
}

PartitionedDataset make_dataset(Eigen::MatrixXd features, std::vector<double> labels,
                                int n_parts, const CsvOptions& options) {
  if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
    throw std::invalid_argument("label count does not match row count");
  }
  PartitionedDataset data;
  if (options.normalize) {
    std::vector<bool> mask = options.categorical_mask.value_or(detect_categorical(features));
    if (static_cast<Eigen::Index>(mask.size()) != features.cols()) {
      throw std::invalid_argument("categorical mask length does not match feature count");
    }
    normalize_columns(features, mask);
  }

  std::set<double> distinct(labels.begin(), labels.end());
  data.class_values.assign(distinct.begin(), distinct.end());
  std::map<double, int> class_of;
  for (std::size_t c = 0; c < data.class_values.size(); ++c) class_of[data.class_values[c]] = static_cast<int>(c);
  if (data.class_values.size() < 2) {
    data.warnings.push_back("dataset has a single class; every partition is degenerate");
  }

  std::vector<int> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return labels[a] < labels[b]; });

  const int rows = static_cast<int>(labels.size());
  const int classes = std::max<int>(1, static_cast<int>(data.class_values.size()));
  data.features.resize(rows, features.cols());
  data.labels = Eigen::MatrixXd::Zero(rows, classes);
  data.label_index.resize(rows);
  for (int r = 0; r < rows; ++r) {
    data.features.row(r) = features.row(order[r]);
    const int cls = class_of.at(labels[order[r]]);
    data.label_index[r] = cls;
    data.labels(r, cls) = 1.0;
  }
  data.partition = contiguous_partition(rows, n_parts);
  return data;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(std::string cell, const std::string& where) {
  auto first = cell.find_first_not_of(" \t\r");
  auto last = cell.find_last_not_of(" \t\r");
  if (first == std::string::npos) throw std::invalid_argument(where + ": empty field");
  cell = cell.substr(first, last - first + 1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw std::invalid_argument(where + ": non-numeric field '" + cell + "'");
  }
  return value;
}

}  // namespace

PartitionedDataset load_csv_dataset(const std::filesystem::path& path, int n_parts,
                                    const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path.string());

  std::vector<std::vector<double>> rows;
  std::vector<double> labels;
  std::string line;
  int line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && options.has_header) continue;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_csv_line(line);
    if (width == 0) width = cells.size();
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cells.size() != width) throw std::invalid_argument(where + ": inconsistent column count");
    if (width < 2) throw std::invalid_argument(where + ": need at least one feature and a label");
    const int label_col = options.label_column < 0 ? static_cast<int>(width) + options.label_column
                                                   : options.label_column;
    if (label_col < 0 || label_col >= static_cast<int>(width)) {
      throw std::invalid_argument(where + ": label column out of range");
    }
    std::vector<double> row;
    row.reserve(width - 1);
    for (std::size_t c = 0; c < width; ++c) {
      double v = parse_number(cells[c], where);
      if (static_cast<int>(c) == label_col) {
        labels.push_back(v);
      } else {
        row.push_back(v);
      }
    }
    rows.push_back(std::move(row));
  }
  if (in.bad()) throw IoError("read failure on " + path.string());

  Eigen::MatrixXd features(rows.size(), width > 0 ? width - 1 : 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) features(r, c) = rows[r][c];
  }
  return make_dataset(std::move(features), std::move(labels), n_parts, options);
}

}  // namespace appg
