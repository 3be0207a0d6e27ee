#pragma once

#include <optional>
#include <string>
#include <vector>

#include "usm/config.hpp"
#include "usm/dataset.hpp"
#include "usm/metrics.hpp"
#include "usm/ranking.hpp"
#include "usm/submit_model.hpp"

namespace usm::harness {

struct StageError : std::runtime_error {
  StageError(const std::string& stage, const std::string& cause)
      : std::runtime_error("stage '" + stage + "' failed: " + cause),
        stage_name(stage) {}
  std::string stage_name;
};

struct ArmFlags {
  bool lhuc = false;
  bool se = false;
  bool debias = false;
};

// "baseline", "lhuc", "se", "debias" and _-joined combinations
ArmFlags arm_flags(const std::string& name);

// deterministic sub-seeds per run seed
std::uint64_t survey_net_seed(std::uint64_t run_seed);
std::uint64_t submit_net_seed(std::uint64_t run_seed);
std::uint64_t eval_label_seed(std::uint64_t run_seed);

SurveyModelConfig arm_model_config(const ExperimentConfig& cfg,
                                   const std::string& arm);

// --- stages (the CLI runs exactly these; run_experiment composes them) ---

std::vector<sim::ImpressionEvent> stage_simulate(const ExperimentConfig& cfg,
                                                 std::uint64_t seed);

data::Manifest stage_export(const std::vector<sim::ImpressionEvent>& events,
                            const ExperimentConfig& cfg,
                            const std::string& data_dir);

SurveyNet stage_train_submit(const std::vector<sim::ImpressionEvent>& train,
                             const ExperimentConfig& cfg,
                             const FeatureSchema& schema, std::uint64_t seed);

// `submit_net` is required for debias arms and ignored otherwise.
SurveyNet stage_train_arm(const std::vector<sim::ImpressionEvent>& train,
                          const ExperimentConfig& cfg,
                          const FeatureSchema& schema, const std::string& arm,
                          std::uint64_t seed, const SurveyNet* submit_net);

// Complete-label evaluation: every shown survey in the eval split becomes a
// labeled record; submitted shows keep their observed answers, unsubmitted
// ones get labels drawn once from the oracle sidecar probabilities with a
// seed fixed per run, identical across arms.
struct EvalData {
  std::vector<sim::ImpressionEvent> events;
  std::map<data::OracleKey, data::OracleRow> oracle;
};

// Builds EvalData from in-memory simulator events (their oracle fields
// become the sidecar); the file-based path goes through data::load_oracle.
EvalData make_eval_data(std::vector<sim::ImpressionEvent> eval_events);

std::vector<metrics::ReportRow> evaluate_arm(
    const std::string& arm, std::uint64_t seed, const SurveyNet& net,
    const EvalData& eval_data, const SurveyNet& submit_net,
    const ExperimentConfig& cfg);

std::vector<metrics::ReportRow> evaluate_submit_model(
    std::uint64_t seed, const SurveyNet& submit_net, const EvalData& eval_data);

// rate rows (raw / debiased / oracle-true) computed from the eval split
std::vector<metrics::ReportRow> survey_rate_rows(
    const std::string& arm, std::uint64_t seed, const EvalData& eval_data,
    const SurveyNet& submit_net, double clip_floor);

// simulate -> export -> train submit -> train arms -> evaluate -> reports.
// Returns all report rows (per-seed plus aggregate) and writes
// report.csv, report_per_seed.csv and report.json under out_dir.
std::vector<metrics::ReportRow> run_experiment(const ExperimentConfig& cfg,
                                               const std::string& out_dir);

std::vector<metrics::ReportRow> aggregate_rows(
    const std::vector<metrics::ReportRow>& per_seed);

}  // namespace usm::harness
