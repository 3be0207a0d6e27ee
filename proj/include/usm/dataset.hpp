#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "usm/events.hpp"
#include "usm/features.hpp"
#include "usm/simulator.hpp"

namespace usm::data {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SplitConfig {
  double train_frac = 0.8;
  std::uint64_t seed = 1;
};

struct Manifest {
  int n_language = 0;
  int n_region = 0;
  int n_device = 0;
  std::map<std::string, std::vector<std::string>> options;  // kind -> options
  long n_events = 0;
  long n_shows = 0;
  long n_submits = 0;
  long train_users = 0;
  long eval_users = 0;
  double train_frac = 0.8;
  std::uint64_t split_seed = 0;

  FeatureSchema feature_schema() const;
};

struct SplitEvents {
  std::vector<sim::ImpressionEvent> train;
  std::vector<sim::ImpressionEvent> eval;
};

// User-level split: a user's impressions land wholly in one side.
SplitEvents split_events(const std::vector<sim::ImpressionEvent>& events,
                         const SplitConfig& split);

// Writes train.jsonl / eval.jsonl (events without oracle fields),
// oracle.jsonl (sidecar keyed by user_id + impression_index) and
// manifest.json into `dir`. The split is user-level and disjoint.
Manifest export_dataset(const std::vector<sim::ImpressionEvent>& events,
                        const sim::SimConfig& sim_config,
                        const SplitConfig& split, const std::string& dir);

Manifest load_manifest(const std::string& dir);

// Event loader used by training paths; oracle fields stay zeroed.
std::vector<sim::ImpressionEvent> load_events(const std::string& path);

struct OracleRow {
  double p_ans_ss = 0.0;
  double p_like_ans = 0.0;
  double p_like_ss = 0.0;
  double pref_logit = 0.0;
  std::vector<std::pair<std::string, double>> p_options;
};

using OracleKey = std::pair<std::uint64_t, long>;

// Evaluation-only loader for the ground-truth sidecar.
std::map<OracleKey, OracleRow> load_oracle(const std::string& path);

}  // namespace usm::data
