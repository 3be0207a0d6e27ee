#include "usm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace usm::metrics {

namespace {

// Shared tie-group walk. `tie_credit` is the score a tied pair receives.
double pair_score_sum(std::span<const double> p, std::span<const int> y,
                      double tie_credit, long& n_pos, long& n_neg) {
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  n_pos = 0;
  n_neg = 0;
  for (int label : y) (label ? n_pos : n_neg)++;
  double score = 0.0;
  long neg_below = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    long pos_in_group = 0, neg_in_group = 0;
    while (j < order.size() && p[order[j]] == p[order[i]]) {
      (y[order[j]] ? pos_in_group : neg_in_group)++;
      ++j;
    }
    score += static_cast<double>(pos_in_group) *
             (static_cast<double>(neg_below) +
              tie_credit * static_cast<double>(neg_in_group));
    neg_below += neg_in_group;
    i = j;
  }
  return score;
}

}  // namespace

double auc_pairs(std::span<const double> p, std::span<const int> y) {
  if (p.size() != y.size())
    throw std::invalid_argument("auc: size mismatch");
  long n_pos = 0, n_neg = 0;
  const double score = pair_score_sum(p, y, 0.5, n_pos, n_neg);
  if (n_pos == 0 || n_neg == 0)
    throw MetricError("auc undefined: single-class input");
  return score / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double auc(std::span<const PredictionRecord> records) {
  std::vector<double> p(records.size());
  std::vector<int> y(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    p[i] = records[i].p;
    y[i] = records[i].y;
  }
  return auc_pairs(p, y);
}

double calibration_pairs(std::span<const double> p, std::span<const int> y) {
  if (p.size() != y.size() || p.empty())
    throw std::invalid_argument("calibration: bad input");
  double sum_p = 0.0, sum_y = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sum_p += p[i];
    sum_y += y[i];
  }
  if (sum_y <= 0.0)
    throw MetricError("calibration undefined: no positive labels");
  return sum_p / sum_y - 1.0;
}

double calibration(std::span<const PredictionRecord> records) {
  std::vector<double> p(records.size());
  std::vector<int> y(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    p[i] = records[i].p;
    y[i] = records[i].y;
  }
  return calibration_pairs(p, y);
}

double user_auc(std::span<const double> p, std::span<const int> y,
                TieRule rule) {
  long n_pos = 0, n_neg = 0;
  const double credit = rule == TieRule::half ? 0.5 : 0.0;
  const double score = pair_score_sum(p, y, credit, n_pos, n_neg);
  if (n_pos == 0 || n_neg == 0)
    throw MetricError("user_auc undefined: single-class input");
  return score / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace {

double uauc_impl(std::span<const PredictionRecord> records, TieRule rule) {
  std::map<std::uint64_t, std::pair<std::vector<double>, std::vector<int>>>
      by_user;
  for (const auto& r : records) {
    auto& [p, y] = by_user[r.user_id];
    p.push_back(r.p);
    y.push_back(r.y);
  }
  double total = 0.0;
  long users = 0;
  for (auto& [uid, py] : by_user) {
    const auto& [p, y] = py;
    const bool has_pos = std::find(y.begin(), y.end(), 1) != y.end();
    const bool has_neg = std::find(y.begin(), y.end(), 0) != y.end();
    if (!has_pos || !has_neg) continue;  // degenerate users excluded
    total += user_auc(p, y, rule);
    ++users;
  }
  if (users == 0)
    throw MetricError("uauc undefined: no user with both classes");
  return total / static_cast<double>(users);
}

}  // namespace

double nfb_uauc(std::span<const PredictionRecord> records, TieRule rule) {
  return uauc_impl(records, rule);
}

double pfb_uauc(std::span<const PredictionRecord> records, TieRule rule) {
  return uauc_impl(records, rule);
}

double survey_like_rate(const SurveyTally& tally) {
  auto it = tally.kinds.find("satisfaction");
  if (it == tally.kinds.end() || it->second.submits <= 0)
    throw MetricError("survey_like_rate undefined: no satisfaction submits");
  const auto& opts = it->second.option_submits;
  auto like = opts.find("like");
  const long like_subs = like == opts.end() ? 0 : like->second;
  return static_cast<double>(like_subs) /
         static_cast<double>(it->second.submits);
}

double survey_issue_rate(const SurveyTally& tally, const std::string& option) {
  for (const auto& [kind, kt] : tally.kinds) {
    auto it = kt.option_submits.find(option);
    if (it == kt.option_submits.end()) continue;
    if (kt.submits <= 0)
      throw MetricError("survey_issue_rate undefined: no submits for kind " +
                        kind);
    return static_cast<double>(it->second) /
           static_cast<double>(kt.submits);
  }
  throw MetricError("survey_issue_rate: unknown option " + option);
}

std::vector<double> quantile_edges(std::vector<double> vals,
                                   std::span<const double> qs) {
  if (vals.empty()) throw std::invalid_argument("quantile_edges: empty");
  std::sort(vals.begin(), vals.end());
  std::vector<double> edges;
  edges.reserve(qs.size());
  for (double q : qs) {
    const auto rank = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(vals.size())));
    edges.push_back(vals[rank == 0 ? 0 : rank - 1]);
  }
  return edges;
}

std::vector<StratumMetrics> stratified_report(
    std::span<const PredictionRecord> records,
    std::span<const double> propensity, std::span<const double> edges) {
  if (records.size() != propensity.size())
    throw std::invalid_argument("stratified_report: propensity missing");
  const std::size_t n_buckets = edges.size() + 1;
  std::vector<std::vector<PredictionRecord>> buckets(n_buckets);
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::size_t b = 0;
    while (b < edges.size() && propensity[i] >= edges[b]) ++b;
    buckets[b].push_back(records[i]);
  }
  static const char* kQuartileLabels[] = {"[0,P25)", "[P25,P50)", "[P50,P75)",
                                          "[P75,P100]"};
  std::vector<StratumMetrics> out;
  for (std::size_t b = 0; b < n_buckets; ++b) {
    StratumMetrics sm;
    sm.label = (edges.size() == 3 && b < 4)
                   ? kQuartileLabels[b]
                   : "bucket" + std::to_string(b);
    sm.n = static_cast<long>(buckets[b].size());
    try {
      sm.auc = auc(buckets[b]);
    } catch (const std::exception&) {
      sm.auc = std::nullopt;
    }
    try {
      sm.calibration = calibration(buckets[b]);
    } catch (const std::exception&) {
      sm.calibration = std::nullopt;
    }
    out.push_back(std::move(sm));
  }
  return out;
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void write_csv_impl(std::span<const ReportRow> rows, const std::string& path,
                    bool with_seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << (with_seed ? "arm,seed,head,metric,stratum,value,n\n"
                    : "arm,head,metric,stratum,value,n\n");
  for (const auto& r : rows) {
    out << r.arm << ',';
    if (with_seed) out << r.seed << ',';
    out << r.head << ',' << r.metric << ',' << r.stratum << ','
        << (r.value ? format_value(*r.value) : "undefined") << ',' << r.n
        << '\n';
  }
}

}  // namespace

void write_report_csv(std::span<const ReportRow> rows,
                      const std::string& path) {
  write_csv_impl(rows, path, false);
}

void write_report_per_seed_csv(std::span<const ReportRow> rows,
                               const std::string& path) {
  write_csv_impl(rows, path, true);
}

void write_report_json(std::span<const ReportRow> rows,
                       const std::string& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row;
    row["arm"] = r.arm;
    row["seed"] = r.seed;
    row["head"] = r.head;
    row["metric"] = r.metric;
    row["stratum"] = r.stratum;
    if (r.value)
      row["value"] = *r.value;
    else
      row["value"] = nullptr;
    row["n"] = r.n;
    arr.push_back(std::move(row));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << arr.dump(2) << '\n';
}

}  // namespace usm::metrics
