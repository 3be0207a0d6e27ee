#include "usm/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "usm/labeling.hpp"

namespace usm {

namespace {

using nlohmann::json;

std::string strip(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// removes a trailing comment that is not inside a string
std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

json parse_scalar(const std::string& raw, int line_no) {
  const std::string v = strip(raw);
  if (v.empty())
    throw ConfigParseError("toml line " + std::to_string(line_no) +
                           ": empty value");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"')
      throw ConfigParseError("toml line " + std::to_string(line_no) +
                             ": unterminated string");
    return v.substr(1, v.size() - 2);
  }
  if (v == "true") return true;
  if (v == "false") return false;
  try {
    std::size_t used = 0;
    if (v.find_first_of(".eE") == std::string::npos ||
        (v.size() > 2 && v.rfind("0x", 0) == 0)) {
      const long long i = std::stoll(v, &used, 0);
      if (used == v.size()) return i;
    }
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigParseError("toml line " + std::to_string(line_no) +
                         ": cannot parse value '" + v + "'");
}

json parse_value(const std::string& raw, int line_no) {
  const std::string v = strip(raw);
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']')
      throw ConfigParseError("toml line " + std::to_string(line_no) +
                             ": arrays must close on the same line");
    json arr = json::array();
    std::string inner = v.substr(1, v.size() - 2);
    std::string cur;
    bool in_str = false;
    for (char c : inner) {
      if (c == '"') in_str = !in_str;
      if (c == ',' && !in_str) {
        if (!strip(cur).empty()) arr.push_back(parse_scalar(cur, line_no));
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!strip(cur).empty()) arr.push_back(parse_scalar(cur, line_no));
    return arr;
  }
  return parse_scalar(v, line_no);
}

json* descend(json& root, const std::string& dotted, int line_no) {
  json* cur = &root;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) {
    part = strip(part);
    if (part.empty())
      throw ConfigParseError("toml line " + std::to_string(line_no) +
                             ": bad table name");
    cur = &(*cur)[part];
  }
  return cur;
}

}  // namespace

json parse_toml(const std::string& text) {
  json root = json::object();
  json* table = &root;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigParseError("toml line " + std::to_string(line_no) +
                               ": bad table header");
      table = descend(root, line.substr(1, line.size() - 2), line_no);
      if (!table->is_object() && !table->is_null())
        throw ConfigParseError("toml line " + std::to_string(line_no) +
                               ": table redefines a value");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigParseError("toml line " + std::to_string(line_no) +
                             ": expected key = value");
    const std::string key = strip(line.substr(0, eq));
    if (key.empty())
      throw ConfigParseError("toml line " + std::to_string(line_no) +
                             ": empty key");
    (*table)[key] = parse_value(line.substr(eq + 1), line_no);
  }
  return root;
}

json load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigParseError("cannot read config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0)
    return json::parse(text);
  return parse_toml(text);
}

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void apply_sim(const json& j, sim::SimConfig& s) {
  maybe(j, "users", s.users);
  maybe(j, "items", s.items);
  maybe(j, "authors", s.authors);
  maybe(j, "latent_dim", s.latent_dim);
  maybe(j, "language_probs", s.language_probs);
  maybe(j, "region_probs", s.region_probs);
  maybe(j, "device_probs", s.device_probs);
  maybe(j, "impressions_per_user", s.impressions_per_user);
  maybe(j, "survey_show_prob", s.survey_show_prob);
  maybe(j, "kind_mix", s.kind_mix);
  maybe(j, "pref_scale", s.pref_scale);
  maybe(j, "pref_bias", s.pref_bias);
  maybe(j, "sat_bias_sd", s.sat_bias_sd);
  maybe(j, "pref_mean0", s.pref_mean0);
  maybe(j, "pref_mean1", s.pref_mean1);
  maybe(j, "quality_mean0", s.quality_mean0);
  maybe(j, "attr_strength", s.attr_strength);
  maybe(j, "temperament_bias", s.temperament_bias);
  maybe(j, "temperament_scale", s.temperament_scale);
  maybe(j, "activity_weight", s.activity_weight);
  maybe(j, "confound_rho", s.confound_rho);
  maybe(j, "dont_gap", s.dont_gap);
  maybe(j, "issue_bias", s.issue_bias);
  maybe(j, "issue_intensity_w", s.issue_intensity_w);
  maybe(j, "issue_sens_w", s.issue_sens_w);
  maybe(j, "like_bias", s.like_bias);
  maybe(j, "dislike_bias", s.dislike_bias);
  maybe(j, "report_bias", s.report_bias);
  maybe(j, "eng_pref_w", s.eng_pref_w);
  maybe(j, "eng_issue_w", s.eng_issue_w);
  maybe(j, "intensity_logit_sd", s.intensity_logit_sd);
  if (j.contains("option_base_rate"))
    s.option_base_rate =
        j.at("option_base_rate").get<std::map<std::string, double>>();
}

void apply_model(const json& j, SurveyModelConfig& m) {
  maybe(j, "backbone_dims", m.backbone_dims);
  maybe(j, "head_dims", m.head_dims);
  maybe(j, "se_reduction", m.se_reduction);
  maybe(j, "features", m.features);
  maybe(j, "lhuc_features", m.lhuc_features);
  maybe(j, "embedding_dim", m.embedding_dim);
  maybe(j, "hash_bits", m.hash_bits);
}

void apply_train(const json& j, TrainConfig& t) {
  maybe(j, "epochs", t.epochs);
  maybe(j, "batch_size", t.batch_size);
  if (j.contains("learning_rate"))
    t.optimizer.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("optimizer")) {
    const auto name = j.at("optimizer").get<std::string>();
    if (name == "sgd")
      t.optimizer.kind = nn::OptimizerKind::sgd;
    else if (name == "adam")
      t.optimizer.kind = nn::OptimizerKind::adam;
    else
      throw ConfigParseError("unknown optimizer: " + name);
  }
}

}  // namespace

ExperimentConfig default_experiment_config() {
  ExperimentConfig cfg;
  cfg.survey_model.heads = default_survey_heads();
  cfg.submit_model = cfg.survey_model;
  cfg.submit_model.heads = default_submit_heads();
  cfg.submit_model.use_lhuc = false;
  cfg.submit_model.use_se = false;
  cfg.submit_model.features = {"language", "region", "device", "activity",
                               "submit_history", "exposure_index"};
  return cfg;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg = default_experiment_config();
  if (j.contains("simulator")) apply_sim(j.at("simulator"), cfg.sim);
  if (j.contains("model")) {
    apply_model(j.at("model"), cfg.survey_model);
    // the submit model inherits the survey dims unless overridden below
    apply_model(j.at("model"), cfg.submit_model);
    cfg.submit_model.features = {"language", "region", "device", "activity",
                                 "submit_history", "exposure_index"};
  }
  if (j.contains("submit_model"))
    apply_model(j.at("submit_model"), cfg.submit_model);
  if (j.contains("train")) {
    apply_train(j.at("train"), cfg.train);
    apply_train(j.at("train"), cfg.submit_train);
  }
  if (j.contains("submit_train"))
    apply_train(j.at("submit_train"), cfg.submit_train);
  if (j.contains("split")) {
    const auto& s = j.at("split");
    maybe(s, "train_frac", cfg.split.train_frac);
    maybe(s, "seed", cfg.split.seed);
  }
  if (j.contains("experiment")) {
    const auto& e = j.at("experiment");
    maybe(e, "arms", cfg.arms);
    maybe(e, "seeds", cfg.seeds);
    maybe(e, "clip_floor", cfg.clip_floor);
  }
  if (j.contains("ranking")) {
    const auto& r = j.at("ranking");
    maybe(r, "enabled", cfg.rank_eval.enabled);
    maybe(r, "k", cfg.rank_eval.k);
    maybe(r, "n_requests", cfg.rank_eval.n_requests);
    maybe(r, "n_candidates", cfg.rank_eval.n_candidates);
    if (r.contains("weights"))
      cfg.rank_eval.weights =
          r.at("weights").get<std::map<std::string, double>>();
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return experiment_config_from_json(load_config_file(path));
}

}  // namespace usm
