#include "usm/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "usm/serialize.hpp"

namespace usm::harness {

namespace fs = std::filesystem;

ArmFlags arm_flags(const std::string& name) {
  ArmFlags flags;
  if (name == "baseline") return flags;
  std::stringstream ss(name);
  std::string tok;
  while (std::getline(ss, tok, '_')) {
    if (tok == "lhuc")
      flags.lhuc = true;
    else if (tok == "se")
      flags.se = true;
    else if (tok == "debias")
      flags.debias = true;
    else
      throw std::invalid_argument("unknown arm name: " + name);
  }
  return flags;
}

std::uint64_t survey_net_seed(std::uint64_t run_seed) {
  return stream_seed(run_seed, 0x535652u);
}
std::uint64_t submit_net_seed(std::uint64_t run_seed) {
  return stream_seed(run_seed, 0x53554Du);
}
std::uint64_t eval_label_seed(std::uint64_t run_seed) {
  return stream_seed(run_seed, 0x45564Cu);
}

SurveyModelConfig arm_model_config(const ExperimentConfig& cfg,
                                   const std::string& arm) {
  const ArmFlags flags = arm_flags(arm);
  SurveyModelConfig model = cfg.survey_model;
  model.use_lhuc = flags.lhuc;
  model.use_se = flags.se;
  return model;
}

std::vector<sim::ImpressionEvent> stage_simulate(const ExperimentConfig& cfg,
                                                 std::uint64_t seed) {
  try {
    const sim::World world = sim::generate_population(cfg.sim, seed);
    return sim::simulate_feed(world, seed);
  } catch (const std::exception& e) {
    throw StageError("simulate", e.what());
  }
}

data::Manifest stage_export(const std::vector<sim::ImpressionEvent>& events,
                            const ExperimentConfig& cfg,
                            const std::string& data_dir) {
  try {
    return data::export_dataset(events, cfg.sim, cfg.split, data_dir);
  } catch (const std::exception& e) {
    throw StageError("export", e.what());
  }
}

SurveyNet stage_train_submit(const std::vector<sim::ImpressionEvent>& train,
                             const ExperimentConfig& cfg,
                             const FeatureSchema& schema,
                             std::uint64_t seed) {
  try {
    TrainConfig tc = cfg.submit_train;
    tc.shuffle_seed = stream_seed(submit_net_seed(seed), 0x7EA1u);
    return train_submit(train, cfg.submit_model, schema,
                        submit_net_seed(seed), tc);
  } catch (const std::exception& e) {
    throw StageError("train_submit", e.what());
  }
}

SurveyNet stage_train_arm(const std::vector<sim::ImpressionEvent>& train,
                          const ExperimentConfig& cfg,
                          const FeatureSchema& schema, const std::string& arm,
                          std::uint64_t seed, const SurveyNet* submit_net) {
  try {
    const ArmFlags flags = arm_flags(arm);
    if (flags.debias && submit_net == nullptr)
      throw std::runtime_error(
          "arm '" + arm +
          "' needs a trained submit model (train the submit arm first)");
    SurveyNet net(arm_model_config(cfg, arm), schema, survey_net_seed(seed));
    LabeledExamples labeled = build_survey_examples(train, net);
    if (labeled.examples.empty())
      throw std::runtime_error("no submitted surveys in training split");
    if (flags.debias)
      attach_ipw(train, *submit_net, labeled, cfg.clip_floor);
    TrainConfig tc = cfg.train;
    tc.shuffle_seed = stream_seed(survey_net_seed(seed), 0x7EA1u);
    net.train(labeled.examples, tc);
    return net;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("train_arm:" + arm, e.what());
  }
}

EvalData make_eval_data(std::vector<sim::ImpressionEvent> eval_events) {
  EvalData ed;
  for (const auto& ev : eval_events) {
    data::OracleRow row;
    row.p_ans_ss = ev.oracle.p_ans_ss;
    row.p_like_ans = ev.oracle.p_like_ans;
    row.p_like_ss = ev.oracle.p_like_ss;
    row.pref_logit = ev.oracle.pref_logit;
    row.p_options = ev.oracle.p_options;
    ed.oracle[{ev.user_id, ev.impression_index}] = std::move(row);
  }
  ed.events = std::move(eval_events);
  return ed;
}

namespace {

const data::OracleRow& oracle_row(const EvalData& ed,
                                  const sim::ImpressionEvent& ev) {
  auto it = ed.oracle.find({ev.user_id, ev.impression_index});
  if (it == ed.oracle.end())
    throw std::runtime_error("oracle sidecar row missing for user " +
                             std::to_string(ev.user_id));
  return it->second;
}

double oracle_option_prob(const data::OracleRow& row,
                          const std::string& option) {
  for (const auto& [name, p] : row.p_options)
    if (name == option) return p;
  throw std::runtime_error("oracle row lacks option " + option);
}

// label for (event, head): observed when submitted, otherwise drawn from
// the oracle probability with a per-(user, impression, head) stream
int complete_label(const sim::ImpressionEvent& ev, const data::OracleRow& row,
                   const HeadSpec& head, std::uint64_t label_seed) {
  if (ev.survey.submitted) {
    return std::find(ev.survey.answers.begin(), ev.survey.answers.end(),
                     head.option) != ev.survey.answers.end()
               ? 1
               : 0;
  }
  const double p = oracle_option_prob(row, head.option);
  Rng rng(stream_seed(stream_seed(label_seed, ev.user_id,
                                  static_cast<std::uint64_t>(
                                      ev.impression_index)),
                      fnv1a(head.name)));
  return rng.bernoulli(p) ? 1 : 0;
}

std::optional<double> safe_auc(
    const std::vector<metrics::PredictionRecord>& records) {
  try {
    return metrics::auc(records);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::optional<double> safe_cal(
    const std::vector<metrics::PredictionRecord>& records) {
  try {
    return metrics::calibration(records);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

std::vector<metrics::ReportRow> evaluate_arm(
    const std::string& arm, std::uint64_t seed, const SurveyNet& net,
    const EvalData& eval_data, const SurveyNet& submit_net,
    const ExperimentConfig& cfg) {
  const auto& heads = net.config().heads;
  const std::uint64_t label_seed = eval_label_seed(seed);

  // complete-label records per head, with the submit-model propensity kept
  // alongside for stratification
  std::vector<std::vector<metrics::PredictionRecord>> complete(heads.size());
  std::vector<std::vector<double>> complete_prop(heads.size());
  std::vector<std::vector<metrics::PredictionRecord>> submitted(heads.size());
  // implicit-feedback records for UAUC, one per impression and head
  std::vector<std::vector<metrics::PredictionRecord>> engagement(heads.size());

  for (const auto& ev : eval_data.events) {
    const FeatureVector fv = encode_event(ev, net.layout());
    const Vec probs = net.predict(fv);

    for (std::size_t h = 0; h < heads.size(); ++h) {
      metrics::PredictionRecord rec;
      rec.user_id = ev.user_id;
      rec.item_id = ev.item_id;
      rec.head = heads[h].name;
      const bool satisfaction_head = heads[h].kind == "satisfaction";
      // satisfaction head predicts discontent; positive engagement ranking
      // uses the complementary score
      rec.p = satisfaction_head ? 1.0 - probs[h] : probs[h];
      rec.y = satisfaction_head
                  ? (ev.engagement == sim::Engagement::like ? 1 : 0)
                  : (ev.engagement == sim::Engagement::dislike ||
                             ev.engagement == sim::Engagement::report
                         ? 1
                         : 0);
      engagement[h].push_back(rec);
    }

    if (!ev.survey.shown) continue;
    const data::OracleRow& row = oracle_row(eval_data, ev);
    const PropensityRecord prop = propensity(
        submit_net, encode_event(ev, submit_net.layout()), ev.survey.kind,
        cfg.clip_floor);
    for (std::size_t h = 0; h < heads.size(); ++h) {
      if (heads[h].kind != ev.survey.kind) continue;
      metrics::PredictionRecord rec;
      rec.user_id = ev.user_id;
      rec.item_id = ev.item_id;
      rec.head = heads[h].name;
      rec.p = probs[h];
      rec.y = complete_label(ev, row, heads[h], label_seed);
      rec.ipw_weight = prop.ipw_weight;
      complete[h].push_back(rec);
      complete_prop[h].push_back(prop.predicted);
      if (ev.survey.submitted) submitted[h].push_back(rec);
    }
  }

  std::vector<metrics::ReportRow> rows;
  auto push = [&](const std::string& head, const std::string& metric,
                  const std::string& stratum, std::optional<double> value,
                  long n) {
    rows.push_back({arm, static_cast<long>(seed), head, metric, stratum,
                    value, n});
  };

  for (std::size_t h = 0; h < heads.size(); ++h) {
    const auto& name = heads[h].name;
    push(name, "auc", "", safe_auc(complete[h]),
         static_cast<long>(complete[h].size()));
    push(name, "calibration", "", safe_cal(complete[h]),
         static_cast<long>(complete[h].size()));
    push(name, "auc_submitted", "", safe_auc(submitted[h]),
         static_cast<long>(submitted[h].size()));
    push(name, "calibration_submitted", "", safe_cal(submitted[h]),
         static_cast<long>(submitted[h].size()));

    std::optional<double> uauc;
    try {
      uauc = heads[h].kind == "satisfaction"
                 ? metrics::pfb_uauc(engagement[h])
                 : metrics::nfb_uauc(engagement[h]);
    } catch (const std::exception&) {
    }
    push(name, "uauc", "", uauc, static_cast<long>(engagement[h].size()));

    if (!complete[h].empty()) {
      const std::vector<double> qs = {0.25, 0.5, 0.75};
      const auto edges = metrics::quantile_edges(complete_prop[h], qs);
      const auto strata = metrics::stratified_report(
          complete[h], complete_prop[h], edges);
      for (const auto& s : strata) {
        push(name, "auc", s.label, s.auc, s.n);
        push(name, "calibration", s.label, s.calibration, s.n);
      }
    }
  }
  return rows;
}

std::vector<metrics::ReportRow> evaluate_submit_model(
    std::uint64_t seed, const SurveyNet& submit_net,
    const EvalData& eval_data) {
  const auto& heads = submit_net.config().heads;
  std::vector<std::vector<metrics::PredictionRecord>> records(heads.size());
  for (const auto& ev : eval_data.events) {
    if (!ev.survey.shown) continue;
    const int h = submit_net.head_index_for_kind(ev.survey.kind);
    if (h < 0) continue;
    const Vec probs =
        submit_net.predict(encode_event(ev, submit_net.layout()));
    metrics::PredictionRecord rec;
    rec.user_id = ev.user_id;
    rec.item_id = ev.item_id;
    rec.head = heads[static_cast<std::size_t>(h)].name;
    rec.p = probs[static_cast<std::size_t>(h)];
    rec.y = ev.survey.submitted ? 1 : 0;
    records[static_cast<std::size_t>(h)].push_back(rec);
  }
  std::vector<metrics::ReportRow> rows;
  for (std::size_t h = 0; h < heads.size(); ++h) {
    rows.push_back({"submit", static_cast<long>(seed), heads[h].name, "auc",
                    "", safe_auc(records[h]),
                    static_cast<long>(records[h].size())});
    rows.push_back({"submit", static_cast<long>(seed), heads[h].name,
                    "calibration", "", safe_cal(records[h]),
                    static_cast<long>(records[h].size())});
  }
  return rows;
}

std::vector<metrics::ReportRow> survey_rate_rows(
    const std::string& arm, std::uint64_t seed, const EvalData& eval_data,
    const SurveyNet& submit_net, double clip_floor) {
  metrics::SurveyTally tally;
  // per kind: (issue flag per option, sub_pred) for the debiased estimator
  std::map<std::string,
           std::map<std::string, std::vector<std::pair<bool, double>>>>
      debias_inputs;
  std::map<std::string, std::pair<double, long>> true_option_sum;  // over shows

  for (const auto& ev : eval_data.events) {
    if (!ev.survey.shown) continue;
    auto& kt = tally.kinds[ev.survey.kind];
    ++kt.shows;
    const data::OracleRow& row = oracle_row(eval_data, ev);
    for (const auto& [opt, p] : row.p_options) {
      auto& [sum, n] = true_option_sum[opt];
      sum += p;
      ++n;
    }
    if (!ev.survey.submitted) continue;
    ++kt.submits;
    const double sub_pred =
        propensity(submit_net, encode_event(ev, submit_net.layout()),
                   ev.survey.kind, clip_floor)
            .clipped;
    for (const auto& opt : sim::options_of_kind(ev.survey.kind)) {
      const bool selected =
          std::find(ev.survey.answers.begin(), ev.survey.answers.end(),
                    opt) != ev.survey.answers.end();
      if (selected) ++kt.option_submits[opt];
      debias_inputs[ev.survey.kind][opt].emplace_back(selected, sub_pred);
    }
  }

  std::vector<metrics::ReportRow> rows;
  auto push = [&](const std::string& head, const std::string& metric,
                  std::optional<double> value, long n) {
    rows.push_back({arm, static_cast<long>(seed), head, metric, "", value,
                    n});
  };

  for (const auto& [kind, kt] : tally.kinds) {
    for (const auto& opt : sim::options_of_kind(kind)) {
      std::optional<double> raw, debiased, truth;
      if (kt.submits > 0) {
        raw = static_cast<double>(
                  kt.option_submits.count(opt) ? kt.option_submits.at(opt)
                                               : 0) /
              static_cast<double>(kt.submits);
        debiased = debiased_issue_rate(debias_inputs[kind][opt]);
      }
      auto it = true_option_sum.find(opt);
      if (it != true_option_sum.end() && it->second.second > 0)
        truth = it->second.first / static_cast<double>(it->second.second);
      push(kind + "/" + opt, "rate_raw", raw, kt.submits);
      push(kind + "/" + opt, "rate_debiased", debiased, kt.submits);
      push(kind + "/" + opt, "rate_true", truth,
           it == true_option_sum.end() ? 0 : it->second.second);
    }
  }
  return rows;
}

std::vector<metrics::ReportRow> aggregate_rows(
    const std::vector<metrics::ReportRow>& per_seed) {
  struct Key {
    std::string arm, head, metric, stratum;
    bool operator<(const Key& o) const {
      return std::tie(arm, head, metric, stratum) <
             std::tie(o.arm, o.head, o.metric, o.stratum);
    }
  };
  std::map<Key, std::pair<std::vector<double>, long>> acc;
  std::vector<Key> order;
  for (const auto& r : per_seed) {
    Key k{r.arm, r.head, r.metric, r.stratum};
    if (!acc.count(k)) order.push_back(k);
    auto& [vals, n] = acc[k];
    if (r.value) vals.push_back(*r.value);
    n += r.n;
  }
  std::vector<metrics::ReportRow> out;
  for (const auto& k : order) {
    const auto& [vals, n] = acc.at(k);
    std::optional<double> mean;
    if (!vals.empty()) {
      double s = 0.0;
      for (double v : vals) s += v;
      mean = s / static_cast<double>(vals.size());
    }
    out.push_back({k.arm, -1, k.head, k.metric, k.stratum, mean, n});
  }
  return out;
}

std::vector<metrics::ReportRow> run_experiment(const ExperimentConfig& cfg,
                                               const std::string& out_dir) {
  if (cfg.seeds.empty()) throw StageError("config", "no seeds configured");
  if (cfg.arms.empty()) throw StageError("config", "no arms configured");
  for (const auto& arm : cfg.arms) arm_flags(arm);  // validate names early

  std::vector<fs::path> created;
  auto track = [&](const fs::path& p) { created.push_back(p); };

  try {
    fs::create_directories(out_dir);
    std::vector<metrics::ReportRow> per_seed;

    for (const std::uint64_t seed : cfg.seeds) {
      const std::string seed_tag = "seed" + std::to_string(seed);
      const std::string data_dir = out_dir + "/data_" + seed_tag;
      const auto events = stage_simulate(cfg, seed);
      stage_export(events, cfg, data_dir);
      for (const char* f :
           {"/train.jsonl", "/eval.jsonl", "/oracle.jsonl",
            "/manifest.json"})
        track(data_dir + f);

      const data::Manifest manifest = data::load_manifest(data_dir);
      const FeatureSchema schema = manifest.feature_schema();
      const auto train_events = data::load_events(data_dir + "/train.jsonl");
      EvalData eval_data;
      eval_data.events = data::load_events(data_dir + "/eval.jsonl");
      eval_data.oracle = data::load_oracle(data_dir + "/oracle.jsonl");

      SurveyNet submit_net =
          stage_train_submit(train_events, cfg, schema, seed);
      fs::create_directories(out_dir + "/models");
      const std::string submit_path =
          out_dir + "/models/submit_" + seed_tag + ".bin";
      save_model(submit_net, "submit", submit_path);
      track(submit_path);

      auto submit_rows = evaluate_submit_model(seed, submit_net, eval_data);
      per_seed.insert(per_seed.end(), submit_rows.begin(), submit_rows.end());

      std::vector<rank::ArmSpec> rank_arms;
      std::vector<SurveyNet> arm_nets;
      arm_nets.reserve(cfg.arms.size());
      for (const auto& arm : cfg.arms) {
        arm_nets.push_back(stage_train_arm(train_events, cfg, schema, arm,
                                           seed, &submit_net));
        const std::string model_path =
            out_dir + "/models/" + arm + "_" + seed_tag + ".bin";
        save_model(arm_nets.back(), "survey", model_path);
        track(model_path);

        auto rows = evaluate_arm(arm, seed, arm_nets.back(), eval_data,
                                 submit_net, cfg);
        per_seed.insert(per_seed.end(), rows.begin(), rows.end());
        auto rates =
            survey_rate_rows(arm, seed, eval_data, submit_net, cfg.clip_floor);
        per_seed.insert(per_seed.end(), rates.begin(), rates.end());
      }

      if (cfg.rank_eval.enabled) {
        for (std::size_t a = 0; a < cfg.arms.size(); ++a)
          rank_arms.push_back(
              {cfg.arms[a], &arm_nets[a], cfg.rank_eval.weights});
        const sim::World world = sim::generate_population(cfg.sim, seed);
        const auto rates = rank::ab_rank_eval(
            world, rank_arms, cfg.rank_eval.k, cfg.rank_eval.n_requests,
            cfg.rank_eval.n_candidates, stream_seed(seed, 0x4Bu));
        for (const auto& r : rates) {
          per_seed.push_back({r.name, static_cast<long>(seed), "",
                              "rank_like_rate", "", r.like_rate,
                              cfg.rank_eval.n_requests});
          for (const auto& [opt, rate] : r.option_rates)
            per_seed.push_back({r.name, static_cast<long>(seed), "",
                                "rank_" + opt + "_rate", "", rate,
                                cfg.rank_eval.n_requests});
        }
      }
    }

    const auto aggregate = aggregate_rows(per_seed);
    metrics::write_report_per_seed_csv(per_seed,
                                       out_dir + "/report_per_seed.csv");
    track(out_dir + "/report_per_seed.csv");
    metrics::write_report_csv(aggregate, out_dir + "/report.csv");
    track(out_dir + "/report.csv");
    std::vector<metrics::ReportRow> all = aggregate;
    all.insert(all.end(), per_seed.begin(), per_seed.end());
    metrics::write_report_json(all, out_dir + "/report.json");
    track(out_dir + "/report.json");

    std::vector<metrics::ReportRow> result = per_seed;
    result.insert(result.end(), aggregate.begin(), aggregate.end());
    return result;
  } catch (...) {
    // partial outputs are removed so a failed run leaves no artifacts
    std::error_code ec;
    for (const auto& p : created) fs::remove(p, ec);
    throw;
  }
}

}  // namespace usm::harness
