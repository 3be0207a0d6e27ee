#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "usm/dataset.hpp"
#include "usm/simulator.hpp"
#include "usm/survey_model.hpp"

#include "json.hpp"

namespace usm {

struct ConfigParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Minimal TOML subset: [table] / [a.b] headers, key = value with strings,
// booleans, integers, floats and single-line scalar arrays, # comments.
// Enough for experiment files; .json configs are accepted as-is.
nlohmann::json parse_toml(const std::string& text);
nlohmann::json load_config_file(const std::string& path);

struct RankEvalConfig {
  bool enabled = true;
  int k = 10;
  int n_requests = 500;
  int n_candidates = 50;
  std::map<std::string, double> weights = {{"satisfaction", -1.0},
                                           {"sexual", -2.0},
                                           {"inappropriate", -2.0},
                                           {"violent", -2.0},
                                           {"spam", -1.0}};
};

struct ExperimentConfig {
  sim::SimConfig sim;
  SurveyModelConfig survey_model;
  SurveyModelConfig submit_model;
  TrainConfig train;
  TrainConfig submit_train;
  data::SplitConfig split;
  std::vector<std::string> arms = {"baseline", "lhuc", "lhuc_se",
                                   "lhuc_se_debias"};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  double clip_floor = 0.01;
  RankEvalConfig rank_eval;
};

ExperimentConfig default_experiment_config();
// Overrides the defaults with whatever keys the document provides.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

}  // namespace usm
