#pragma once

#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace appg {

struct CsvOptions {
  bool has_header = false;
  int label_column = -1;  // negative counts from the end
  bool normalize = true;
  // Columns (feature indices, after removing the label) excluded from
  // normalization. When empty, columns with exactly two distinct values are
  // treated as categorical.
  std::optional<std::vector<bool>> categorical_mask;
};

struct PartitionedDataset {
  Eigen::MatrixXd features;             // n_samples x n_features
  Eigen::MatrixXd labels;               // one-hot, n_samples x n_classes
  std::vector<int> label_index;         // class id per row
  std::vector<double> class_values;     // raw label value per class id
  std::vector<std::pair<int, int>> partition;  // [begin, end) row range per node
  std::vector<std::string> warnings;

  int num_samples() const { return static_cast<int>(features.rows()); }
  int num_features() const { return static_cast<int>(features.cols()); }
  int num_classes() const { return static_cast<int>(labels.cols()); }
  int num_parts() const { return static_cast<int>(partition.size()); }
};

// Contiguous near-equal split: the first (rows % parts) ranges get one extra row.
std::vector<std::pair<int, int>> contiguous_partition(int rows, int parts);

// Columnwise z-score of non-categorical columns; zero-variance columns use
// divisor 1 so they map to all zeros.
void normalize_columns(Eigen::MatrixXd& features, const std::vector<bool>& categorical);

std::vector<bool> detect_categorical(const Eigen::MatrixXd& features);

// Builds a dataset from raw rows: normalizes, stable-sorts by label, then
// partitions into n_parts contiguous ranges.
PartitionedDataset make_dataset(Eigen::MatrixXd features, std::vector<double> labels,
                                int n_parts, const CsvOptions& options);

PartitionedDataset load_csv_dataset(const std::filesystem::path& path, int n_parts,
                                    const CsvOptions& options);

}  // namespace appg
