#include "softgrove/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "softgrove/errors.hpp"

namespace softgrove {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

bool parse_number(std::string_view cell, double& out) {
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, out);
  return ec == std::errc{} && ptr == end && std::isfinite(out);
}

void append_number(std::string& out, double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  out.append(buf, res.ptr);
}

// Indices 0..n-1 shuffled, then grouped by class (stable) so that a
// round-robin assignment over the result is stratified.
std::vector<std::size_t> stratified_order(const Dataset& data, std::mt19937_64& rng) {
  std::vector<std::size_t> order(data.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  if (data.task != Task::regression) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return data.labels[a] < data.labels[b];
    });
  }
  return order;
}

}  // namespace

int Dataset::output_dim() const noexcept {
  switch (task) {
    case Task::regression: return static_cast<int>(target_dim);
    case Task::binary: return 1;
    case Task::multiclass: return static_cast<int>(std::max<std::size_t>(num_classes(), 2));
  }
  return 1;
}

void Dataset::augmented(std::size_t i, std::span<double> out) const {
  out[0] = 1.0;
  const auto r = row(i);
  std::copy(r.begin(), r.end(), out.begin() + 1);
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.task = task;
  out.dim = dim;
  out.target_dim = target_dim;
  out.feature_names = feature_names;
  out.class_names = class_names;
  out.target_name = target_name;
  out.rows = indices.size();
  out.features.reserve(indices.size() * dim);
  for (const std::size_t i : indices) {
    if (i >= rows) throw std::out_of_range("subset index out of range");
    const auto r = row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    if (task == Task::regression) {
      const auto t = target(i);
      out.targets.insert(out.targets.end(), t.begin(), t.end());
    } else {
      out.labels.push_back(labels[i]);
    }
  }
  return out;
}

Dataset parse_csv(std::string_view text, Task task, std::string_view source) {
  Dataset data;
  data.task = task;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  std::map<std::string, int, std::less<>> class_index;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (columns == 0) {
      if (cells.size() < 2) {
        throw DataError(std::string(source) + ": header needs at least one feature and a target");
      }
      columns = cells.size();
      for (std::size_t c = 0; c + 1 < columns; ++c) data.feature_names.emplace_back(cells[c]);
      data.target_name = std::string(cells.back());
      data.dim = columns - 1;
      continue;
    }
    if (cells.size() != columns) {
      throw DataError(std::string(source) + ": row " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " columns, expected " + std::to_string(columns));
    }
    for (std::size_t c = 0; c + 1 < columns; ++c) {
      double value = 0.0;
      if (!parse_number(cells[c], value)) {
        throw DataError(std::string(source) + ": row " + std::to_string(line_no) + ", column " +
                        std::to_string(c + 1) + " ('" + data.feature_names[c] +
                        "'): cannot parse '" + std::string(cells[c]) + "' as a number");
      }
      data.features.push_back(value);
    }
    const std::string_view tcell = cells.back();
    if (task == Task::regression) {
      double value = 0.0;
      if (!parse_number(tcell, value)) {
        throw DataError(std::string(source) + ": row " + std::to_string(line_no) + ", column " +
                        std::to_string(columns) + " (target): cannot parse '" + std::string(tcell) +
                        "' as a number");
      }
      data.targets.push_back(value);
    } else {
      auto it = class_index.find(tcell);
      if (it == class_index.end()) {
        it = class_index.emplace(std::string(tcell), static_cast<int>(data.class_names.size())).first;
        data.class_names.emplace_back(tcell);
      }
      data.labels.push_back(it->second);
    }
    ++data.rows;
  }
  if (columns == 0) throw DataError(std::string(source) + ": missing header row");
  if (data.rows == 0) throw DataError(std::string(source) + ": no data rows");
  if (task == Task::binary && data.num_classes() > 2) {
    throw DataError(std::string(source) + ": binary task but target has " +
                    std::to_string(data.num_classes()) + " distinct values");
  }
  return data;
}

Dataset load_csv(const std::filesystem::path& path, Task task) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), task, path.string());
}

std::string format_csv(const Dataset& data) {
  std::string out;
  for (std::size_t c = 0; c < data.dim; ++c) {
    out += c < data.feature_names.size() ? data.feature_names[c] : "x" + std::to_string(c + 1);
    out += ',';
  }
  out += data.target_name;
  out += '\n';
  for (std::size_t i = 0; i < data.rows; ++i) {
    for (const double v : data.row(i)) {
      append_number(out, v);
      out += ',';
    }
    if (data.task == Task::regression) {
      append_number(out, data.targets[i * data.target_dim]);
    } else {
      const auto label = static_cast<std::size_t>(data.labels[i]);
      out += label < data.class_names.size() ? data.class_names[label] : std::to_string(label);
    }
    out += '\n';
  }
  return out;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << format_csv(data);
}

void align_classes(Dataset& data, const std::vector<std::string>& names) {
  if (data.task == Task::regression) return;
  std::vector<int> remap(data.class_names.size(), -1);
  for (std::size_t c = 0; c < data.class_names.size(); ++c) {
    const auto it = std::find(names.begin(), names.end(), data.class_names[c]);
    if (it == names.end()) {
      throw DataError("class '" + data.class_names[c] + "' was not seen by the model");
    }
    remap[c] = static_cast<int>(it - names.begin());
  }
  for (int& l : data.labels) l = remap[static_cast<std::size_t>(l)];
  data.class_names = names;
}

void NormalizationStats::apply(Dataset& data) const {
  if (data.dim != feature_mean.size()) {
    throw DataError("normalization expects " + std::to_string(feature_mean.size()) +
                    " features, dataset has " + std::to_string(data.dim));
  }
  for (std::size_t i = 0; i < data.rows; ++i) {
    for (std::size_t j = 0; j < data.dim; ++j) {
      double& x = data.features[i * data.dim + j];
      x = feature_std[j] > 0.0 ? (x - feature_mean[j]) / feature_std[j] : 0.0;
    }
  }
  if (data.task == Task::regression && !target_mean.empty()) {
    for (std::size_t i = 0; i < data.rows; ++i) {
      for (std::size_t k = 0; k < data.target_dim; ++k) {
        double& t = data.targets[i * data.target_dim + k];
        t = target_std[k] > 0.0 ? (t - target_mean[k]) / target_std[k] : 0.0;
      }
    }
  }
}

double NormalizationStats::restore_target(double z, std::size_t k) const {
  return target_mean[k] + z * target_std[k];
}

NormalizationStats fit_normalization(const Dataset& train) {
  if (train.rows == 0) throw std::invalid_argument("cannot normalize with an empty training set");
  NormalizationStats s;
  const auto n = static_cast<double>(train.rows);
  auto column_stats = [&](const std::vector<double>& values, std::size_t width, std::size_t col,
                          double& mean, double& sd) {
    double sum = 0.0;
    for (std::size_t i = 0; i < train.rows; ++i) sum += values[i * width + col];
    mean = sum / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < train.rows; ++i) {
      const double d = values[i * width + col] - mean;
      ss += d * d;
    }
    sd = std::sqrt(ss / n);
    // Constant up to rounding noise.
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) sd = 0.0;
  };
  s.feature_mean.resize(train.dim);
  s.feature_std.resize(train.dim);
  for (std::size_t j = 0; j < train.dim; ++j) {
    column_stats(train.features, train.dim, j, s.feature_mean[j], s.feature_std[j]);
  }
  if (train.task == Task::regression) {
    s.target_mean.resize(train.target_dim);
    s.target_std.resize(train.target_dim);
    for (std::size_t k = 0; k < train.target_dim; ++k) {
      column_stats(train.targets, train.target_dim, k, s.target_mean[k], s.target_std[k]);
    }
  }
  return s;
}

NormalizationStats normalize(Dataset& train, std::span<Dataset> others) {
  NormalizationStats s = fit_normalization(train);
  s.apply(train);
  for (Dataset& d : others) s.apply(d);
  return s;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_test_third(
    const Dataset& data, std::uint64_t seed) {
  if (data.rows < 3) throw std::invalid_argument("split_test_third needs at least 3 rows");
  std::mt19937_64 rng(seed);
  const auto order = stratified_order(data, rng);
  std::vector<std::size_t> trainval;
  std::vector<std::size_t> test;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i % 3 == 2 ? test : trainval).push_back(order[i]);
  }
  std::sort(trainval.begin(), trainval.end());
  std::sort(test.begin(), test.end());
  return {std::move(trainval), std::move(test)};
}

FoldPlan cv_5x2(const Dataset& trainval, std::uint64_t seed) {
  if (trainval.rows < 4) throw std::invalid_argument("cv_5x2 needs at least 4 rows");
  FoldPlan plan;
  plan.seed = seed;
  std::mt19937_64 rng(seed);
  for (int rep = 0; rep < 5; ++rep) {
    const auto order = stratified_order(trainval, rng);
    std::vector<std::size_t> a;
    std::vector<std::size_t> b;
    for (std::size_t i = 0; i < order.size(); ++i) (i % 2 == 0 ? a : b).push_back(order[i]);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    plan.pairs.push_back({a, b});
    plan.pairs.push_back({std::move(b), std::move(a)});
  }
  return plan;
}

Dataset synth(std::string_view name, std::size_t n, std::uint64_t seed) {
  if (n < 8) throw std::invalid_argument("synthetic datasets need at least 8 rows");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Dataset data;
  data.task = Task::binary;
  data.rows = n;
  data.class_names = {"0", "1"};
  data.target_name = "y";
  data.labels.resize(n);

  if (name == "xor") {
    data.dim = 2;
    data.features.resize(n * 2);
    constexpr double cx[4] = {2.0, -2.0, 2.0, -2.0};
    constexpr double cy[4] = {2.0, -2.0, -2.0, 2.0};
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = i % 4;
      // redraw each coordinate until it lies on its centre's side of the axis
      for (std::size_t j = 0; j < 2; ++j) {
        const double centre = j == 0 ? cx[c] : cy[c];
        double v = centre + normal(rng);
        while ((v > 0.0) != (centre > 0.0)) v = centre + normal(rng);
        data.features[i * 2 + j] = v;
      }
      data.labels[i] = c < 2 ? 0 : 1;
    }
  } else if (name == "two_gaussians" || name == "ring") {
    data.dim = 20;
    data.features.resize(n * 20);
    const bool ring = name == "ring";
    const double shift = ring ? 1.0 / std::sqrt(20.0) : 2.0 / std::sqrt(20.0);
    for (std::size_t i = 0; i < n; ++i) {
      const int label = static_cast<int>(i % 2);
      data.labels[i] = label;
      for (std::size_t j = 0; j < 20; ++j) {
        double x = normal(rng);
        if (ring) {
          x = label == 0 ? 2.0 * x : x + shift;
        } else {
          x += label == 0 ? shift : -shift;
        }
        data.features[i * 20 + j] = x;
      }
    }
  } else {
    throw std::invalid_argument("unknown synthetic dataset '" + std::string(name) +
                                "' (expected xor, two_gaussians or ring)");
  }
  for (std::size_t j = 0; j < data.dim; ++j) data.feature_names.push_back("x" + std::to_string(j + 1));

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  return data.subset(perm);
}

}  // namespace softgrove
