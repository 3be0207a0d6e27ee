#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "usm/features.hpp"

namespace usm::sim {

enum class Engagement : std::uint8_t { none, like, dislike, report };

const char* engagement_name(Engagement e);
Engagement engagement_from_name(const std::string& name);

struct SurveyBlock {
  bool shown = false;
  std::string kind;  // empty unless shown
  bool submitted = false;
  std::vector<std::string> answers;  // present only when submitted
};

// Ground-truth probabilities; emitted to the oracle sidecar, never visible
// to training code paths.
struct OracleInfo {
  double p_ans_ss = 0.0;
  double p_like_ans = 0.0;
  double p_like_ss = 0.0;  // == p_like_ans * p_ans_ss exactly
  double pref_logit = 0.0;
  // per-option answer probabilities of the shown survey's kind
  std::vector<std::pair<std::string, double>> p_options;
};

struct ImpressionEvent {
  std::uint64_t user_id = 0;
  long impression_index = 0;
  std::uint64_t item_id = 0;
  std::uint64_t author_id = 0;
  Attrs attrs;
  Engagement engagement = Engagement::none;
  SurveyBlock survey;
  OracleInfo oracle;
};

}  // namespace usm::sim
