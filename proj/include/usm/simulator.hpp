#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "usm/events.hpp"
#include "usm/matrix.hpp"
#include "usm/rng.hpp"

namespace usm::sim {

inline const std::vector<std::string> kSurveyKinds = {"satisfaction", "sexual",
                                                      "inappropriate"};
inline const std::vector<std::string> kSatisfactionOptions = {"like", "neutral",
                                                              "dont_like"};
inline const std::vector<std::string> kIssueOptions = {"sexual", "violent",
                                                       "spam", "inappropriate"};

// options answered by each kind's survey
const std::vector<std::string>& options_of_kind(const std::string& kind);

struct SimConfig {
  long users = 2000;
  long items = 1000;
  long authors = 200;
  int latent_dim = 8;
  std::vector<double> language_probs = {0.4, 0.3, 0.2, 0.1};
  std::vector<double> region_probs = {0.3, 0.25, 0.2, 0.15, 0.1};
  std::vector<double> device_probs = {0.5, 0.3, 0.2};
  int impressions_per_user = 50;

  // survey distribution
  double survey_show_prob = 0.3;
  std::vector<double> kind_mix = {1.0, 1.0, 1.0};  // aligned with kSurveyKinds

  // satisfaction ground truth: pref_logit = pref_scale*(u.pref . i.quality)
  //   /sqrt(d) + sat_bias + attr modulation + pref_bias
  double pref_scale = 1.0;
  double pref_bias = -0.2;
  double sat_bias_sd = 1.2;
  double pref_mean0 = 0.8;     // population alignment with quality dim 0
  double pref_mean1 = 0.0;     // second visible direction, off by default
  double quality_mean0 = 0.8;
  double attr_strength = 0.0;  // per-category latent modulation vectors

  // submission ground truth: P(ans|ss) = sigmoid(temperament + w*activity)
  double temperament_bias = -0.6;
  double temperament_scale = 1.4;
  double activity_weight = 0.5;
  // correlation between submission temperament and the user's satisfaction
  // driver (sat_bias + pref[0]); negative values make dissatisfied users
  // over-represented among submitters
  double confound_rho = 0.0;

  // answers
  double dont_gap = 0.2;
  double issue_bias = 0.8;
  double issue_intensity_w = 1.0;
  double issue_sens_w = 0.8;

  // engagement
  double like_bias = -1.4;
  double dislike_bias = -0.8;
  double report_bias = -1.6;
  double eng_pref_w = 0.7;
  double eng_issue_w = 1.0;

  std::map<std::string, double> option_base_rate = {{"sexual", 0.06},
                                                    {"violent", 0.05},
                                                    {"spam", 0.08},
                                                    {"inappropriate", 0.10}};
  double intensity_logit_sd = 1.5;

  void validate() const;
};

struct SimUser {
  std::uint64_t id = 0;
  Vec pref;
  double sat_bias = 0.0;
  double issue_sensitivity = 0.0;
  double activity = 0.0;
  double temperament = 0.0;
  int language = 0;
  int region = 0;
  int device = 0;
};

struct SimItem {
  std::uint64_t id = 0;
  std::uint64_t author_id = 0;
  Vec quality;
  Vec issue_intensity;  // aligned with kIssueOptions, each in [0,1]
};

struct World {
  SimConfig config;
  std::uint64_t seed = 0;
  std::vector<SimUser> users;
  std::vector<SimItem> items;
  // per attribute: one latent modulation vector per category code
  std::vector<Matrix> attr_mod;  // [language, region, device], codes x d

  const SimUser& user_by_id(std::uint64_t id) const;
  const SimItem& item_by_id(std::uint64_t id) const;

  double pref_logit(const SimUser& u, const SimItem& i) const;
  double p_like_ans(const SimUser& u, const SimItem& i) const;
  double p_dont_ans(const SimUser& u, const SimItem& i) const;
  double p_ans_ss(const SimUser& u) const;
  // issue option answer probability, option from kIssueOptions
  double issue_answer_logit(const SimUser& u, const SimItem& i,
                            const std::string& option) const;
  double p_issue_ans(const SimUser& u, const SimItem& i,
                     const std::string& option) const;
  double p_option_ans(const SimUser& u, const SimItem& i,
                      const std::string& kind, const std::string& option) const;
};

World generate_population(const SimConfig& config, std::uint64_t seed);

// Deterministic per-user streams derived from (seed, user id); events are
// ordered by (user id, impression index).
std::vector<ImpressionEvent> simulate_feed(const World& world,
                                           std::uint64_t seed);

}  // namespace usm::sim
