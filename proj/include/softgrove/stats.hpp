#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "softgrove/data.hpp"
#include "json.hpp"

namespace softgrove {

// 100 x mean squared error (targets are expected on the standardized scale).
double mse_metric(std::span<const double> predictions, std::span<const double> targets);

// Percentage of matching labels, in [0,100].
double accuracy_metric(std::span<const int> predictions, std::span<const int> labels);

// Class decisions from raw tree responses (N x K, row-major): sign of the
// logit for binary tasks, argmax (first maximum) for multiclass.
std::vector<int> decide(std::span<const double> raw, Task task, std::size_t width);

// The task's metric on raw responses: MSE for regression, accuracy otherwise.
double metric(std::span<const double> raw, const Dataset& data);

constexpr bool higher_is_better(Task task) noexcept { return task != Task::regression; }

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

// Two-sided tail probability of Student's t with `df` degrees of freedom.
double student_t_two_sided(double t, double df);

double normal_two_sided(double z);

enum class Winner { none, a, b };

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
  bool significant = false;
  // Differences had zero variance; t is +/-inf (nonzero mean) or 0.
  bool degenerate = false;
  Winner winner = Winner::none;
};

// Paired t-test on d_i = a_i - b_i, two-sided.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b, double alpha = 0.05,
                          bool higher_better = true);

struct RankSumResult {
  double w = 0.0;  // sum of the midranks of `a`
  double u = 0.0;  // w - n_a (n_a + 1) / 2
  double z = 0.0;  // normal score (0 when the exact distribution is used)
  double p = 1.0;
  bool exact = false;
  bool significant = false;
};

// Wilcoxon rank-sum with midranks for ties. Exact permutation distribution
// when either group has fewer than 8 values, otherwise the normal
// approximation with tie and continuity correction.
RankSumResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b,
                                double alpha = 0.05);

double mean(std::span<const double> v);
double stddev(std::span<const double> v);  // sample standard deviation

struct EvalReport {
  std::string model;
  std::string dataset;
  std::vector<double> metric_folds;
  std::vector<double> size_folds;

  double metric_mean() const { return mean(metric_folds); }
  double metric_std() const { return stddev(metric_folds); }
  double size_mean() const { return mean(size_folds); }
  double size_std() const { return stddev(size_folds); }
};

struct ReportRow {
  std::string dataset;
  std::vector<EvalReport> models;
  std::optional<std::string> metric_winner;
  std::optional<std::string> size_winner;
  double alpha = 0.05;
  bool higher_is_better = true;
};

// Marks a model as winner when it has the best mean and is significantly
// better than every other model (paired t-test on metrics, rank-sum on
// sizes where smaller wins).
ReportRow compare(std::vector<EvalReport> models, double alpha = 0.05, bool higher_better = true);

nlohmann::ordered_json row_json(const ReportRow& row);
nlohmann::ordered_json report_json(std::span<const ReportRow> rows);
std::string report_text(std::span<const ReportRow> rows);

}  // namespace softgrove
