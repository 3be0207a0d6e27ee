#include "usm/labeling.hpp"

#include <algorithm>

namespace usm {

std::vector<HeadSpec> default_survey_heads() {
  return {{"satisfaction", "satisfaction", "dont_like"},
          {"sexual", "sexual", "sexual"},
          {"inappropriate", "inappropriate", "inappropriate"},
          {"violent", "inappropriate", "violent"},
          {"spam", "inappropriate", "spam"}};
}

std::vector<HeadSpec> default_submit_heads() {
  return {{"satisfaction_submit", "satisfaction", "submitted"},
          {"sexual_submit", "sexual", "submitted"},
          {"inappropriate_submit", "inappropriate", "submitted"}};
}

FeatureVector encode_event(const sim::ImpressionEvent& ev,
                           const FeatureLayout& layout) {
  FeatureVector fv;
  fv.user_id = ev.user_id;
  fv.item_id = ev.item_id;
  fv.author_id = ev.author_id;
  encode_attrs(layout, ev.attrs, fv.raw);
  return fv;
}

LabeledExamples build_survey_examples(
    const std::vector<sim::ImpressionEvent>& events, const SurveyNet& net) {
  LabeledExamples out;
  const auto& heads = net.config().heads;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& ev = events[i];
    if (!ev.survey.submitted) continue;
    WeightedExample ex;
    ex.features = encode_event(ev, net.layout());
    ex.labels.assign(heads.size(), kLabelNA);
    for (std::size_t h = 0; h < heads.size(); ++h) {
      if (heads[h].kind != ev.survey.kind) continue;
      const bool selected =
          std::find(ev.survey.answers.begin(), ev.survey.answers.end(),
                    heads[h].option) != ev.survey.answers.end();
      ex.labels[h] = selected ? 1 : 0;
    }
    out.examples.push_back(std::move(ex));
    out.event_index.push_back(i);
  }
  return out;
}

LabeledExamples build_submit_examples(
    const std::vector<sim::ImpressionEvent>& events, const SurveyNet& net) {
  LabeledExamples out;
  const auto& heads = net.config().heads;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& ev = events[i];
    if (!ev.survey.shown) continue;
    WeightedExample ex;
    ex.features = encode_event(ev, net.layout());
    ex.labels.assign(heads.size(), kLabelNA);
    for (std::size_t h = 0; h < heads.size(); ++h) {
      if (heads[h].kind != ev.survey.kind) continue;
      ex.labels[h] = ev.survey.submitted ? 1 : 0;
    }
    out.examples.push_back(std::move(ex));
    out.event_index.push_back(i);
  }
  return out;
}

}  // namespace usm
