#include "softgrove/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace softgrove {

namespace {

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  return h;
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
}

// Number of ways to pick `take` of the doubled ranks with each possible sum.
std::vector<double> subset_sum_counts(std::span<const long> doubled, std::size_t take) {
  const long total = std::accumulate(doubled.begin(), doubled.end(), 0L);
  const auto width = static_cast<std::size_t>(total) + 1;
  std::vector<double> dp((take + 1) * width, 0.0);
  dp[0] = 1.0;
  std::size_t seen = 0;
  for (const long r : doubled) {
    ++seen;
    for (std::size_t k = std::min(seen, take); k >= 1; --k) {
      double* row = &dp[k * width];
      const double* prev = &dp[(k - 1) * width];
      for (std::size_t s = width; s-- > static_cast<std::size_t>(r);) {
        row[s] += prev[s - static_cast<std::size_t>(r)];
      }
    }
  }
  return {dp.begin() + static_cast<std::ptrdiff_t>(take * width), dp.end()};
}

std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

double mse_metric(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) {
    throw std::invalid_argument("predictions and targets differ in length");
  }
  if (predictions.empty()) throw std::invalid_argument("metric of an empty sample");
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double r = predictions[i] - targets[i];
    s += r * r;
  }
  return 100.0 * s / static_cast<double>(predictions.size());
}

double accuracy_metric(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("predictions and labels differ in length");
  }
  if (predictions.empty()) throw std::invalid_argument("metric of an empty sample");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == labels[i];
  return 100.0 * static_cast<double>(hits) / static_cast<double>(predictions.size());
}

std::vector<int> decide(std::span<const double> raw, Task task, std::size_t width) {
  if (width == 0 || raw.size() % width != 0) throw std::invalid_argument("bad response width");
  const std::size_t n = raw.size() / width;
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = raw.subspan(i * width, width);
    if (task == Task::binary) {
      out[i] = r[0] > 0.0 ? 1 : 0;
    } else {
      out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
    }
  }
  return out;
}

double metric(std::span<const double> raw, const Dataset& data) {
  if (data.task == Task::regression) return mse_metric(raw, data.targets);
  const auto width = static_cast<std::size_t>(data.output_dim());
  if (raw.size() != data.rows * width) {
    throw std::invalid_argument("predictions and targets differ in length");
  }
  const auto predicted = decide(raw, data.task, width);
  return accuracy_metric(predicted, data.labels);
}

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("incomplete_beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  if (std::isnan(t)) return 1.0;
  return std::clamp(incomplete_beta(0.5 * df, 0.5, df / (df + t * t)), 0.0, 1.0);
}

double normal_two_sided(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (const double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b, double alpha,
                          bool higher_better) {
  check_alpha(alpha);
  if (a.size() != b.size()) throw std::invalid_argument("paired samples differ in length");
  if (a.size() < 2) throw std::invalid_argument("paired t-test needs at least two pairs");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double md = mean(d);
  const double sd = stddev(d);

  TTestResult r;
  r.df = static_cast<double>(n - 1);
  const double scale = std::max(1.0, std::abs(md));
  if (sd <= 1e-14 * scale) {
    r.degenerate = true;
    if (std::abs(md) > 1e-14) {
      r.t = md > 0.0 ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
    } else {
      r.t = 0.0;
      r.p = 1.0;
    }
  } else {
    r.t = md / (sd / std::sqrt(static_cast<double>(n)));
    r.p = student_t_two_sided(r.t, r.df);
  }
  r.significant = r.p < alpha;
  if (r.significant) {
    const bool a_better = higher_better ? md > 0.0 : md < 0.0;
    r.winner = a_better ? Winner::a : Winner::b;
  }
  return r;
}

RankSumResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b,
                                double alpha) {
  check_alpha(alpha);
  if (a.empty() || b.empty()) throw std::invalid_argument("rank-sum test needs two nonempty groups");
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  const std::size_t n = na + nb;

  std::vector<std::pair<double, std::size_t>> pooled;
  pooled.reserve(n);
  for (std::size_t i = 0; i < na; ++i) pooled.emplace_back(a[i], i);
  for (std::size_t i = 0; i < nb; ++i) pooled.emplace_back(b[i], na + i);
  std::sort(pooled.begin(), pooled.end());

  // Doubled midranks stay integral.
  std::vector<long> doubled(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    const auto rank2 = static_cast<long>(i + 1 + j);  // 2 * midrank of positions i+1..j
    for (std::size_t k = i; k < j; ++k) doubled[pooled[k].second] = rank2;
    const auto t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  long w2 = 0;
  for (std::size_t i = 0; i < na; ++i) w2 += doubled[i];

  RankSumResult r;
  r.w = 0.5 * static_cast<double>(w2);
  r.u = r.w - 0.5 * static_cast<double>(na * (na + 1));

  if ((na < 8 || nb < 8) && n <= 300) {
    // Distribution of the smaller group's rank sum under random labelling.
    const bool use_a = na <= nb;
    const std::size_t take = use_a ? na : nb;
    long observed = w2;
    if (!use_a) {
      observed = std::accumulate(doubled.begin(), doubled.end(), 0L) - w2;
    }
    const auto counts = subset_sum_counts(doubled, take);
    double total = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      total += counts[s];
      if (static_cast<long>(s) <= observed) lower += counts[s];
      if (static_cast<long>(s) >= observed) upper += counts[s];
    }
    r.exact = true;
    r.p = std::min(1.0, 2.0 * std::min(lower, upper) / total);
  } else {
    const double dna = static_cast<double>(na);
    const double dnb = static_cast<double>(nb);
    const double dn = static_cast<double>(n);
    const double expected = 0.5 * dna * (dn + 1.0);
    const double var = dna * dnb / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
    if (var <= 0.0) {
      r.p = 1.0;
    } else {
      const double dev = std::max(0.0, std::abs(r.w - expected) - 0.5);
      r.z = std::copysign(dev / std::sqrt(var), r.w - expected);
      r.p = std::min(1.0, normal_two_sided(r.z));
    }
  }
  r.significant = r.p < alpha;
  return r;
}

ReportRow compare(std::vector<EvalReport> models, double alpha, bool higher_better) {
  check_alpha(alpha);
  ReportRow row;
  row.alpha = alpha;
  row.higher_is_better = higher_better;
  if (!models.empty()) row.dataset = models.front().dataset;
  for (const EvalReport& m : models) {
    if (m.dataset != row.dataset) throw std::invalid_argument("reports cover different datasets");
    if (m.metric_folds.size() != models.front().metric_folds.size() ||
        m.size_folds.size() != m.metric_folds.size()) {
      throw std::invalid_argument("reports have different fold counts");
    }
  }
  row.models = std::move(models);
  const auto& ms = row.models;
  if (ms.size() < 2) return row;

  std::size_t best = 0;
  for (std::size_t i = 1; i < ms.size(); ++i) {
    const bool better = higher_better ? ms[i].metric_mean() > ms[best].metric_mean()
                                      : ms[i].metric_mean() < ms[best].metric_mean();
    if (better) best = i;
  }
  bool wins = ms[best].metric_folds.size() >= 2;
  for (std::size_t i = 0; i < ms.size() && wins; ++i) {
    if (i == best) continue;
    const auto t = paired_t_test(ms[best].metric_folds, ms[i].metric_folds, alpha, higher_better);
    wins = t.winner == Winner::a;
  }
  if (wins) row.metric_winner = ms[best].model;

  std::size_t smallest = 0;
  for (std::size_t i = 1; i < ms.size(); ++i) {
    if (ms[i].size_mean() < ms[smallest].size_mean()) smallest = i;
  }
  wins = !ms[smallest].size_folds.empty();
  for (std::size_t i = 0; i < ms.size() && wins; ++i) {
    if (i == smallest) continue;
    const auto rs = wilcoxon_rank_sum(ms[smallest].size_folds, ms[i].size_folds, alpha);
    wins = rs.significant && ms[smallest].size_mean() < ms[i].size_mean();
  }
  if (wins) row.size_winner = ms[smallest].model;
  return row;
}

nlohmann::ordered_json row_json(const ReportRow& row) {
  nlohmann::ordered_json j;
  j["dataset"] = row.dataset;
  j["models"] = nlohmann::ordered_json::array();
  for (const EvalReport& m : row.models) {
    nlohmann::ordered_json mj;
    mj["name"] = m.model;
    mj["metric_mean"] = m.metric_mean();
    mj["metric_folds"] = m.metric_folds;
    mj["size_mean"] = m.size_mean();
    mj["size_folds"] = m.size_folds;
    j["models"].push_back(std::move(mj));
  }
  j["metric_winner"] = row.metric_winner ? nlohmann::ordered_json(*row.metric_winner) : nullptr;
  j["size_winner"] = row.size_winner ? nlohmann::ordered_json(*row.size_winner) : nullptr;
  j["alpha"] = row.alpha;
  return j;
}

nlohmann::ordered_json report_json(std::span<const ReportRow> rows) {
  auto j = nlohmann::ordered_json::array();
  for (const ReportRow& r : rows) j.push_back(row_json(r));
  return j;
}

std::string report_text(std::span<const ReportRow> rows) {
  std::string out;
  for (const ReportRow& row : rows) {
    std::size_t width = 12;
    for (const auto& m : row.models) width = std::max(width, m.model.size() + 2);
    auto cell = [&](const std::string& s) {
      std::string c(width > s.size() ? width - s.size() : 0, ' ');
      return c + s;
    };
    out += "dataset: " + row.dataset + "\n";
    out += std::string(8, ' ');
    for (const auto& m : row.models) out += cell(m.model);
    out += "\n";
    out += row.higher_is_better ? "metric  " : "mse     ";
    for (const auto& m : row.models) {
      std::string v = fmt2(m.metric_mean());
      if (row.metric_winner == m.model) v += "*";
      out += cell(v);
    }
    out += "\nsize    ";
    for (const auto& m : row.models) {
      std::string v = fmt2(m.size_mean());
      if (row.size_winner == m.model) v += "*";
      out += cell(v);
    }
    out += "\n";
  }
  out += "* significantly best (paired t-test on the metric, rank-sum on size)\n";
  return out;
}

}  // namespace softgrove
