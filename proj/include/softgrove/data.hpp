#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "softgrove/tree.hpp"

namespace softgrove {

// Row-major N x d feature matrix plus targets. The bias coordinate is not
// stored; augmented() prepends it.
struct Dataset {
  Task task = Task::regression;
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> features;            // rows * dim
  std::vector<double> targets;             // rows * target_dim, regression only
  std::size_t target_dim = 1;
  std::vector<int> labels;                 // classification only
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;    // label index -> original value
  std::string target_name = "target";

  std::size_t num_classes() const noexcept { return class_names.size(); }
  // Width of the model response: target width for regression, 1 for binary,
  // max(#classes, 2) for multiclass.
  int output_dim() const noexcept;

  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * dim, dim};
  }
  std::span<const double> target(std::size_t i) const {
    return {targets.data() + i * target_dim, target_dim};
  }
  // Writes [1, x_1, ..., x_d] into out (size dim + 1).
  void augmented(std::size_t i, std::span<double> out) const;

  Dataset subset(std::span<const std::size_t> indices) const;
};

struct FoldPair {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
};

struct FoldPlan {
  std::vector<FoldPair> pairs;
  std::uint64_t seed = 0;
};

// Header row required; the last column is the target. Classification targets
// are mapped to label indices by first appearance.
Dataset load_csv(const std::filesystem::path& path, Task task);
Dataset parse_csv(std::string_view text, Task task, std::string_view source = "<memory>");
void write_csv(const Dataset& data, const std::filesystem::path& path);
std::string format_csv(const Dataset& data);

// Re-labels a classification dataset so its class indices follow `names`.
// Throws DataError for a value missing from `names`.
void align_classes(Dataset& data, const std::vector<std::string>& names);

struct NormalizationStats {
  std::vector<double> feature_mean;
  std::vector<double> feature_std;  // 0 for constant features
  std::vector<double> target_mean;  // regression only
  std::vector<double> target_std;

  void apply(Dataset& data) const;
  double restore_target(double z, std::size_t k) const;
};

NormalizationStats fit_normalization(const Dataset& train);

// z-scores `train` and every dataset in `others` with statistics of `train`.
NormalizationStats normalize(Dataset& train, std::span<Dataset> others = {});

// floor(N/3) rows to test, stratified by class for classification tasks.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_test_third(
    const Dataset& data, std::uint64_t seed);

// Five seeded halvings, each used in both directions: 10 (train, valid) pairs.
FoldPlan cv_5x2(const Dataset& trainval, std::uint64_t seed);

// Synthetic sets: "xor" (2-D checkerboard of four Gaussian clusters),
// "two_gaussians" (20-D, shifted means), "ring" (20-D, one class with 4x the
// covariance of the other).
Dataset synth(std::string_view name, std::size_t n, std::uint64_t seed);

}  // namespace softgrove
