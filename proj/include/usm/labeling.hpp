#pragma once

#include <vector>

#include "usm/events.hpp"
#include "usm/survey_model.hpp"

namespace usm {

// Head layouts for the two models. The survey model carries one head per
// answer option that defines an issue ("I don't like it" for the
// satisfaction survey, each selectable reason otherwise); the submit model
// carries one head per survey kind.
std::vector<HeadSpec> default_survey_heads();
std::vector<HeadSpec> default_submit_heads();

FeatureVector encode_event(const sim::ImpressionEvent& ev,
                           const FeatureLayout& layout);

struct LabeledExamples {
  std::vector<WeightedExample> examples;
  std::vector<std::size_t> event_index;  // parallel, into the source events
};

// Submitted surveys only. A sample labels exactly the heads of its own
// survey kind: the head's option selected => positive, otherwise negative.
// All other heads are not-applicable. Weights start at 1.
LabeledExamples build_survey_examples(
    const std::vector<sim::ImpressionEvent>& events, const SurveyNet& net);

// Every survey show; the shown kind's head is labeled with the submitted
// flag, other heads are not-applicable.
LabeledExamples build_submit_examples(
    const std::vector<sim::ImpressionEvent>& events, const SurveyNet& net);

}  // namespace usm
