#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "usm/simulator.hpp"
#include "usm/survey_model.hpp"

namespace usm::rank {

struct RankError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Candidate {
  std::uint64_t item_id = 0;
  FeatureVector features;
  double other_score = 0.0;  // exogenous engagement score
};

struct RankRequest {
  std::vector<Candidate> candidates;
  std::map<std::string, double> weights;  // head name -> weight
};

struct ScoredItem {
  std::uint64_t item_id = 0;
  double final_score = 0.0;
  std::map<std::string, double> head_probs;
};

struct RankResult {
  std::vector<ScoredItem> items;  // non-increasing final_score, ties by id
  int k = 0;
};

// sum_i w_i * p(head_i) + other_score; a nonzero weight without a matching
// head prediction is an error
double final_score(const std::map<std::string, double>& head_probs,
                   const std::map<std::string, double>& weights,
                   double other_score);

RankResult rank_top_k(const SurveyNet& net, const RankRequest& request, int k);

struct ArmSpec {
  std::string name;
  const SurveyNet* net = nullptr;
  std::map<std::string, double> weights;
};

struct ArmRates {
  std::string name;
  double like_rate = 0.0;  // mean ground-truth P(like|ans) of selections
  std::map<std::string, double> option_rates;  // per issue option
};

// Replays identical candidate sets through every arm and reports the
// oracle-expected like/issue rates of each arm's top-k selections.
std::vector<ArmRates> ab_rank_eval(const sim::World& world,
                                   std::span<const ArmSpec> arms, int k,
                                   int n_requests, int n_candidates,
                                   std::uint64_t seed);

}  // namespace usm::rank
