#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace usm::metrics {

struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PredictionRecord {
  std::uint64_t user_id = 0;
  std::uint64_t item_id = 0;
  std::string head;
  double p = 0.0;
  int y = 0;
  double ipw_weight = 1.0;
};

// Mann-Whitney AUC, ties counted 0.5. Throws if a class is missing.
double auc(std::span<const PredictionRecord> records);
double auc_pairs(std::span<const double> p, std::span<const int> y);

// avg(p)/avg(y) - 1; zero is perfectly calibrated. Throws without positives.
double calibration(std::span<const PredictionRecord> records);
double calibration_pairs(std::span<const double> p, std::span<const int> y);

// Per-user AUC averaging. The paper-literal indicator is strict (a tied
// pair scores 0), which makes constant scorers land below 0.5; half counts
// ties as 0.5 like the plain AUC.
enum class TieRule : int { strict_zero, half };

double user_auc(std::span<const double> p, std::span<const int> y,
                TieRule rule);

// Per-user AUC with positives = negative implicit feedback (dislike or
// report), averaged uniformly over users having both classes.
double nfb_uauc(std::span<const PredictionRecord> records,
                TieRule rule = TieRule::strict_zero);
// Same machinery with positives = positive interactions (like/share/...).
double pfb_uauc(std::span<const PredictionRecord> records,
                TieRule rule = TieRule::strict_zero);

struct KindTally {
  long shows = 0;
  long submits = 0;
  std::map<std::string, long> option_submits;
};

struct SurveyTally {
  std::map<std::string, KindTally> kinds;
};

// like submits / all submits over the satisfaction kind
double survey_like_rate(const SurveyTally& tally);
// option submits / all submits of the kind carrying that option
double survey_issue_rate(const SurveyTally& tally, const std::string& option);

// nearest-rank quantiles of vals at each q in (0,1)
std::vector<double> quantile_edges(std::vector<double> vals,
                                   std::span<const double> qs);

struct StratumMetrics {
  std::string label;
  std::optional<double> auc;
  std::optional<double> calibration;
  long n = 0;
};

// Buckets records by propensity against ascending edges; single-class or
// empty buckets are reported undefined rather than throwing.
std::vector<StratumMetrics> stratified_report(
    std::span<const PredictionRecord> records,
    std::span<const double> propensity, std::span<const double> edges);

struct ReportRow {
  std::string arm;
  long seed = -1;  // -1 marks an aggregate across seeds
  std::string head;
  std::string metric;
  std::string stratum;
  std::optional<double> value;
  long n = 0;
};

std::string format_value(double v);

// columns: arm, head, metric, stratum, value, n (aggregate rows only)
void write_report_csv(std::span<const ReportRow> rows,
                      const std::string& path);
// same rows with the seed column included
void write_report_per_seed_csv(std::span<const ReportRow> rows,
                               const std::string& path);
void write_report_json(std::span<const ReportRow> rows,
                       const std::string& path);

}  // namespace usm::metrics
