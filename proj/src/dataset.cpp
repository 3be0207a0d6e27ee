#include "usm/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "usm/rng.hpp"

namespace usm::data {

namespace {

using nlohmann::json;

json event_to_json(const sim::ImpressionEvent& ev) {
  json j;
  j["user_id"] = ev.user_id;
  j["impression_index"] = ev.impression_index;
  j["item_id"] = ev.item_id;
  j["author_id"] = ev.author_id;
  j["attrs"] = {{"language", ev.attrs.language},
                {"region", ev.attrs.region},
                {"device", ev.attrs.device},
                {"activity", ev.attrs.activity},
                {"submit_history", ev.attrs.submit_history},
                {"exposure_index", ev.attrs.exposure_index}};
  j["engagement"] = sim::engagement_name(ev.engagement);
  json survey;
  survey["shown"] = ev.survey.shown;
  if (ev.survey.shown) {
    survey["kind"] = ev.survey.kind;
    survey["submitted"] = ev.survey.submitted;
    if (ev.survey.submitted) survey["answers"] = ev.survey.answers;
  }
  j["survey"] = survey;
  return j;
}

sim::ImpressionEvent event_from_json(const json& j) {
  sim::ImpressionEvent ev;
  ev.user_id = j.at("user_id").get<std::uint64_t>();
  ev.impression_index = j.at("impression_index").get<long>();
  ev.item_id = j.at("item_id").get<std::uint64_t>();
  ev.author_id = j.at("author_id").get<std::uint64_t>();
  const auto& a = j.at("attrs");
  ev.attrs.language = a.at("language").get<int>();
  ev.attrs.region = a.at("region").get<int>();
  ev.attrs.device = a.at("device").get<int>();
  ev.attrs.activity = a.at("activity").get<double>();
  ev.attrs.submit_history = a.at("submit_history").get<int>();
  ev.attrs.exposure_index = a.at("exposure_index").get<int>();
  ev.engagement =
      sim::engagement_from_name(j.at("engagement").get<std::string>());
  const auto& s = j.at("survey");
  ev.survey.shown = s.at("shown").get<bool>();
  if (ev.survey.shown) {
    ev.survey.kind = s.at("kind").get<std::string>();
    ev.survey.submitted = s.at("submitted").get<bool>();
    if (ev.survey.submitted)
      ev.survey.answers = s.at("answers").get<std::vector<std::string>>();
  }
  return ev;
}

}  // namespace

FeatureSchema Manifest::feature_schema() const {
  return FeatureSchema::standard(n_language, n_region, n_device);
}

namespace {

std::map<std::uint64_t, bool> train_membership(
    const std::vector<sim::ImpressionEvent>& events,
    const SplitConfig& split) {
  if (split.train_frac <= 0.0 || split.train_frac >= 1.0)
    throw IoError("split: train_frac must be in (0,1)");
  std::vector<std::uint64_t> user_ids;
  for (const auto& ev : events)
    if (user_ids.empty() || user_ids.back() != ev.user_id)
      user_ids.push_back(ev.user_id);
  std::sort(user_ids.begin(), user_ids.end());
  user_ids.erase(std::unique(user_ids.begin(), user_ids.end()),
                 user_ids.end());

  Rng rng(stream_seed(split.seed, 0x5B117u));
  rng.shuffle(user_ids);
  const auto n_train = static_cast<std::size_t>(
      std::floor(split.train_frac * static_cast<double>(user_ids.size())));
  std::map<std::uint64_t, bool> is_train_user;
  for (std::size_t i = 0; i < user_ids.size(); ++i)
    is_train_user[user_ids[i]] = i < n_train;
  return is_train_user;
}

}  // namespace

SplitEvents split_events(const std::vector<sim::ImpressionEvent>& events,
                         const SplitConfig& split) {
  if (events.empty()) throw IoError("split: no events");
  const auto is_train_user = train_membership(events, split);
  SplitEvents out;
  for (const auto& ev : events)
    (is_train_user.at(ev.user_id) ? out.train : out.eval).push_back(ev);
  return out;
}

Manifest export_dataset(const std::vector<sim::ImpressionEvent>& events,
                        const sim::SimConfig& sim_config,
                        const SplitConfig& split, const std::string& dir) {
  if (events.empty()) throw IoError("export_dataset: no events");
  std::filesystem::create_directories(dir);
  const auto is_train_user = train_membership(events, split);
  long n_train_users = 0;
  for (const auto& [uid, t] : is_train_user)
    if (t) ++n_train_users;

  std::ofstream train(dir + "/train.jsonl", std::ios::binary);
  std::ofstream eval(dir + "/eval.jsonl", std::ios::binary);
  std::ofstream oracle(dir + "/oracle.jsonl", std::ios::binary);
  if (!train || !eval || !oracle)
    throw IoError("export_dataset: cannot open output files in " + dir);

  Manifest m;
  m.n_language = static_cast<int>(sim_config.language_probs.size());
  m.n_region = static_cast<int>(sim_config.region_probs.size());
  m.n_device = static_cast<int>(sim_config.device_probs.size());
  for (const auto& kind : sim::kSurveyKinds)
    m.options[kind] = sim::options_of_kind(kind);
  m.train_frac = split.train_frac;
  m.split_seed = split.seed;
  m.train_users = n_train_users;
  m.eval_users = static_cast<long>(is_train_user.size()) - n_train_users;

  for (const auto& ev : events) {
    ++m.n_events;
    if (ev.survey.shown) ++m.n_shows;
    if (ev.survey.submitted) ++m.n_submits;
    auto& out = is_train_user.at(ev.user_id) ? train : eval;
    out << event_to_json(ev).dump() << '\n';

    json o;
    o["user_id"] = ev.user_id;
    o["impression_index"] = ev.impression_index;
    o["p_ans_ss"] = ev.oracle.p_ans_ss;
    o["p_like_ans"] = ev.oracle.p_like_ans;
    o["p_like_ss"] = ev.oracle.p_like_ss;
    o["pref_logit"] = ev.oracle.pref_logit;
    if (!ev.oracle.p_options.empty()) {
      json opts;
      for (const auto& [name, p] : ev.oracle.p_options) opts[name] = p;
      o["p_options"] = opts;
    }
    oracle << o.dump() << '\n';
  }
  if (!train.flush() || !eval.flush() || !oracle.flush())
    throw IoError("export_dataset: write failure in " + dir);

  json mj;
  mj["n_language"] = m.n_language;
  mj["n_region"] = m.n_region;
  mj["n_device"] = m.n_device;
  mj["options"] = m.options;
  mj["n_events"] = m.n_events;
  mj["n_shows"] = m.n_shows;
  mj["n_submits"] = m.n_submits;
  mj["train_users"] = m.train_users;
  mj["eval_users"] = m.eval_users;
  mj["train_frac"] = m.train_frac;
  mj["split_seed"] = m.split_seed;
  std::ofstream mf(dir + "/manifest.json", std::ios::binary);
  if (!mf) throw IoError("export_dataset: cannot write manifest");
  mf << mj.dump(2) << '\n';
  return m;
}

Manifest load_manifest(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json", std::ios::binary);
  if (!in) throw IoError("missing manifest: " + dir + "/manifest.json");
  json j = json::parse(in);
  Manifest m;
  m.n_language = j.at("n_language").get<int>();
  m.n_region = j.at("n_region").get<int>();
  m.n_device = j.at("n_device").get<int>();
  m.options = j.at("options")
                  .get<std::map<std::string, std::vector<std::string>>>();
  m.n_events = j.at("n_events").get<long>();
  m.n_shows = j.at("n_shows").get<long>();
  m.n_submits = j.at("n_submits").get<long>();
  m.train_users = j.at("train_users").get<long>();
  m.eval_users = j.at("eval_users").get<long>();
  m.train_frac = j.at("train_frac").get<double>();
  m.split_seed = j.at("split_seed").get<std::uint64_t>();
  return m;
}

std::vector<sim::ImpressionEvent> load_events(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing event file: " + path);
  std::vector<sim::ImpressionEvent> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    events.push_back(event_from_json(json::parse(line)));
  }
  return events;
}

std::map<OracleKey, OracleRow> load_oracle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing oracle sidecar: " + path);
  std::map<OracleKey, OracleRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    OracleRow row;
    row.p_ans_ss = j.at("p_ans_ss").get<double>();
    row.p_like_ans = j.at("p_like_ans").get<double>();
    row.p_like_ss = j.at("p_like_ss").get<double>();
    row.pref_logit = j.at("pref_logit").get<double>();
    if (j.contains("p_options")) {
      for (const auto& [name, p] : j.at("p_options").items())
        row.p_options.emplace_back(name, p.get<double>());
    }
    rows[{j.at("user_id").get<std::uint64_t>(),
          j.at("impression_index").get<long>()}] = std::move(row);
  }
  return rows;
}

}  // namespace usm::data
