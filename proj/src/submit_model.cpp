#include "usm/submit_model.hpp"

#include <cmath>
#include <stdexcept>

namespace usm {

PropensityRecord make_propensity(const std::string& kind, double predicted,
                                 double clip_floor) {
  if (!(clip_floor > 0.0) || clip_floor > 1.0)
    throw std::invalid_argument("clip_floor must be in (0,1]");
  PropensityRecord rec;
  rec.kind = kind;
  rec.predicted = predicted;
  rec.clipped = std::min(1.0, std::max(predicted, clip_floor));
  rec.ipw_weight = 1.0 / rec.clipped;
  return rec;
}

PropensityRecord propensity(const SurveyNet& submit_net,
                            const FeatureVector& fv, const std::string& kind,
                            double clip_floor) {
  const int h = submit_net.head_index_for_kind(kind);
  if (h < 0)
    throw std::invalid_argument("submit model has no head for kind " + kind);
  const Vec probs = submit_net.predict(fv);
  return make_propensity(kind, probs[static_cast<std::size_t>(h)], clip_floor);
}

double debiased_issue_rate(
    std::span<const std::pair<bool, double>> submits) {
  if (submits.empty())
    throw std::invalid_argument("debiased_issue_rate: empty submit list");
  double num = 0.0, den = 0.0;
  for (const auto& [issue, sub_pred] : submits) {
    if (!(sub_pred > 0.0) || sub_pred > 1.0)
      throw std::invalid_argument(
          "debiased_issue_rate: sub_pred must be in (0,1]");
    const double w = 1.0 / sub_pred;
    den += w;
    if (issue) num += w;
  }
  return num / den;
}

double ht_issue_rate(std::span<const std::pair<bool, double>> submits,
                     long n_shows) {
  if (n_shows <= 0)
    throw std::invalid_argument("ht_issue_rate: n_shows must be positive");
  double num = 0.0;
  for (const auto& [issue, sub_pred] : submits) {
    if (!(sub_pred > 0.0) || sub_pred > 1.0)
      throw std::invalid_argument("ht_issue_rate: sub_pred must be in (0,1]");
    if (issue) num += 1.0 / sub_pred;
  }
  return num / static_cast<double>(n_shows);
}

void attach_ipw(const std::vector<sim::ImpressionEvent>& events,
                const SurveyNet& submit_net, LabeledExamples& labeled,
                double clip_floor) {
  for (std::size_t i = 0; i < labeled.examples.size(); ++i) {
    const auto& ev = events.at(labeled.event_index[i]);
    FeatureVector fv = encode_event(ev, submit_net.layout());
    labeled.examples[i].sample_weight =
        propensity(submit_net, fv, ev.survey.kind, clip_floor).ipw_weight;
  }
}

SurveyNet train_submit(const std::vector<sim::ImpressionEvent>& events,
                       SurveyModelConfig config, const FeatureSchema& schema,
                       std::uint64_t seed, const TrainConfig& tc) {
  config.use_lhuc = false;  // the submit model never gates
  SurveyNet net(config, schema, seed);
  LabeledExamples labeled = build_submit_examples(events, net);
  if (labeled.examples.empty())
    throw nn::TrainingError("train_submit: no survey shows in dataset");

  for (std::size_t h = 0; h < config.heads.size(); ++h) {
    long pos = 0, neg = 0;
    for (const auto& ex : labeled.examples) {
      if (ex.labels[h] == 1) ++pos;
      if (ex.labels[h] == 0) ++neg;
    }
    if (pos == 0 || neg == 0)
      throw nn::TrainingError(
          "train_submit: single-class labels for kind " +
          config.heads[h].kind);
  }
  net.train(labeled.examples, tc);
  return net;
}

}  // namespace usm
