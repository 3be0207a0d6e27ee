#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "usm/labeling.hpp"
#include "usm/survey_model.hpp"

namespace usm {

// Unclipped IPW has unbounded variance; the floor caps weights at 100.
constexpr double kDefaultClipFloor = 0.01;

struct PropensityRecord {
  std::string kind;
  double predicted = 0.0;  // P(ans|ss) from the submit model
  double clipped = 0.0;
  double ipw_weight = 1.0;  // 1 / clipped
};

PropensityRecord make_propensity(const std::string& kind, double predicted,
                                 double clip_floor = kDefaultClipFloor);

// Predicts the submit probability of `kind` for this example and derives
// the clipped inverse-propensity weight. Throws on an unknown kind.
PropensityRecord propensity(const SurveyNet& submit_net,
                            const FeatureVector& fv, const std::string& kind,
                            double clip_floor = kDefaultClipFloor);

// Self-normalized debiased rate over submits:
//   sum_{issue submits} 1/sub_pred / sum_{all submits} 1/sub_pred
// Entries are (issue flag, sub_pred); sub_pred must lie in (0,1].
double debiased_issue_rate(
    std::span<const std::pair<bool, double>> submits);

// Non-normalized Horvitz-Thompson variant, exposed for oracle tests only:
//   sum_{issue submits} 1/sub_pred / n_shows
double ht_issue_rate(std::span<const std::pair<bool, double>> submits,
                     long n_shows);

// Gives every submitted survey example the clipped IPW weight of its kind.
// This feeds the "response debias" training arm.
void attach_ipw(const std::vector<sim::ImpressionEvent>& events,
                const SurveyNet& submit_net, LabeledExamples& labeled,
                double clip_floor = kDefaultClipFloor);

// Trains the survey-submit propensity model on survey shows (unweighted
// BCE). A kind whose shows are single-class raises an error naming it.
SurveyNet train_submit(const std::vector<sim::ImpressionEvent>& events,
                       SurveyModelConfig config, const FeatureSchema& schema,
                       std::uint64_t seed, const TrainConfig& tc);

}  // namespace usm
