#pragma once

#include <string>

#include "usm/survey_model.hpp"

#include "json.hpp"

namespace usm {

nlohmann::json config_to_json(const SurveyModelConfig& cfg);
SurveyModelConfig config_from_json(const nlohmann::json& j);
nlohmann::json schema_to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const nlohmann::json& j);

// Container formats:
//   *.bin  — little-endian binary, bit-exact round trip
//   *.json — readable container, value-exact round trip
// Both carry a version tag, the model-kind tag ("survey"/"submit"), a config
// echo, the head-name manifest and every tensor in row-major order.
void save_model(const SurveyNet& net, const std::string& kind,
                const std::string& path);

struct LoadedModel {
  std::string kind;
  SurveyNet net;
};

LoadedModel load_model(const std::string& path);

}  // namespace usm
