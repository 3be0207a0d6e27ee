// usm — survey modeling sandbox CLI
//
// Subcommands: simulate | train | evaluate | rank | abtest |
// feature-importance | grad-check | experiment.
// Exit codes: 0 success, 2 usage errors (bad flags, missing files),
// 1 runtime failures.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "usm/config.hpp"
#include "usm/harness.hpp"
#include "usm/labeling.hpp"
#include "usm/metrics.hpp"
#include "usm/ranking.hpp"
#include "usm/serialize.hpp"
#include "usm/submit_model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

usm::ExperimentConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return usm::default_experiment_config();
  if (!fs::exists(path))
    throw CLI::ValidationError("config", "config file not found: " + path);
  return usm::load_experiment_config(path);
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::exists(path))
    throw CLI::ValidationError(what, what + " not found: " + path);
}

usm::harness::EvalData load_eval_data(const std::string& data_dir) {
  usm::harness::EvalData ed;
  ed.events = usm::data::load_events(data_dir + "/eval.jsonl");
  ed.oracle = usm::data::load_oracle(data_dir + "/oracle.jsonl");
  return ed;
}

int cmd_simulate(const std::string& config_path, std::uint64_t seed,
                 const std::string& out_dir) {
  const auto cfg = load_config_or_default(config_path);
  const auto events = usm::harness::stage_simulate(cfg, seed);
  const auto manifest = usm::harness::stage_export(events, cfg, out_dir);
  std::cout << "simulated " << manifest.n_events << " impressions ("
            << manifest.n_shows << " survey shows, " << manifest.n_submits
            << " submits) into " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& arm, std::uint64_t seed,
              const std::string& model_dir) {
  const auto cfg = load_config_or_default(config_path);
  require_file(data_dir + "/manifest.json", "dataset");
  const auto manifest = usm::data::load_manifest(data_dir);
  const auto schema = manifest.feature_schema();
  const auto train_events = usm::data::load_events(data_dir + "/train.jsonl");
  fs::create_directories(model_dir);

  if (arm == "submit") {
    const auto net =
        usm::harness::stage_train_submit(train_events, cfg, schema, seed);
    const std::string path =
        model_dir + "/submit_seed" + std::to_string(seed) + ".bin";
    usm::save_model(net, "submit", path);
    std::cout << "wrote " << path << "\n";
    return 0;
  }

  const auto flags = usm::harness::arm_flags(arm);
  std::optional<usm::LoadedModel> submit;
  if (flags.debias) {
    const std::string submit_path =
        model_dir + "/submit_seed" + std::to_string(seed) + ".bin";
    if (!fs::exists(submit_path))
      throw CLI::ValidationError(
          "submit model",
          "arm '" + arm + "' depends on a trained submit model; expected " +
              submit_path + " (run `train --arm submit` first)");
    submit = usm::load_model(submit_path);
  }
  const auto net = usm::harness::stage_train_arm(
      train_events, cfg, schema, arm, seed, submit ? &submit->net : nullptr);
  const std::string path =
      model_dir + "/" + arm + "_seed" + std::to_string(seed) + ".bin";
  usm::save_model(net, "survey", path);
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& data_dir,
                 const std::string& model_dir,
                 const std::vector<std::string>& arms, std::uint64_t seed,
                 const std::string& out_dir) {
  const auto cfg = load_config_or_default(config_path);
  require_file(data_dir + "/manifest.json", "dataset");
  const auto eval_data = load_eval_data(data_dir);
  const std::string submit_path =
      model_dir + "/submit_seed" + std::to_string(seed) + ".bin";
  require_file(submit_path, "submit model");
  auto submit = usm::load_model(submit_path);

  std::vector<usm::metrics::ReportRow> rows =
      usm::harness::evaluate_submit_model(seed, submit.net, eval_data);
  for (const auto& arm : arms) {
    const std::string path =
        model_dir + "/" + arm + "_seed" + std::to_string(seed) + ".bin";
    require_file(path, "model");
    auto loaded = usm::load_model(path);
    auto arm_rows = usm::harness::evaluate_arm(arm, seed, loaded.net,
                                               eval_data, submit.net, cfg);
    rows.insert(rows.end(), arm_rows.begin(), arm_rows.end());
    auto rates = usm::harness::survey_rate_rows(arm, seed, eval_data,
                                                submit.net, cfg.clip_floor);
    rows.insert(rows.end(), rates.begin(), rates.end());
  }
  fs::create_directories(out_dir);
  usm::metrics::write_report_per_seed_csv(rows,
                                          out_dir + "/report_per_seed.csv");
  const auto aggregate = usm::harness::aggregate_rows(rows);
  usm::metrics::write_report_csv(aggregate, out_dir + "/report.csv");
  std::vector<usm::metrics::ReportRow> all = aggregate;
  all.insert(all.end(), rows.begin(), rows.end());
  usm::metrics::write_report_json(all, out_dir + "/report.json");
  std::cout << "wrote " << out_dir << "/report.csv\n";
  return 0;
}

int cmd_rank(const std::string& model_path, const std::string& requests_path,
             int k, const std::string& out_path) {
  require_file(model_path, "model");
  require_file(requests_path, "requests");
  auto loaded = usm::load_model(model_path);
  std::ifstream in(requests_path);
  json req_doc = json::parse(in);

  json responses = json::array();
  for (const auto& jreq : req_doc.at("requests")) {
    usm::rank::RankRequest request;
    if (jreq.contains("weights"))
      request.weights =
          jreq.at("weights").get<std::map<std::string, double>>();
    usm::Attrs attrs;
    const auto& ja = jreq.at("user").at("attrs");
    attrs.language = ja.value("language", 0);
    attrs.region = ja.value("region", 0);
    attrs.device = ja.value("device", 0);
    attrs.activity = ja.value("activity", 0.0);
    attrs.submit_history = ja.value("submit_history", 0);
    attrs.exposure_index = ja.value("exposure_index", 0);
    const std::uint64_t user_id = jreq.at("user").at("user_id");
    for (const auto& jc : jreq.at("candidates")) {
      usm::rank::Candidate c;
      c.item_id = jc.at("item_id").get<std::uint64_t>();
      c.other_score = jc.value("other_score", 0.0);
      c.features.user_id = user_id;
      c.features.item_id = c.item_id;
      c.features.author_id = jc.value("author_id", 0);
      usm::encode_attrs(loaded.net.layout(), attrs, c.features.raw);
      request.candidates.push_back(std::move(c));
    }
    const auto result = usm::rank::rank_top_k(loaded.net, request, k);
    json jres;
    jres["items"] = json::array();
    for (const auto& item : result.items) {
      json ji;
      ji["item_id"] = item.item_id;
      ji["final_score"] = item.final_score;
      ji["head_probs"] = item.head_probs;
      jres["items"].push_back(std::move(ji));
    }
    responses.push_back(std::move(jres));
  }
  json out_doc;
  out_doc["responses"] = responses;
  if (out_path.empty()) {
    std::cout << out_doc.dump(2) << "\n";
  } else {
    std::ofstream out(out_path, std::ios::binary);
    out << out_doc.dump(2) << "\n";
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int cmd_abtest(const std::string& config_path,
               const std::vector<std::string>& arms,
               const std::string& model_dir, std::uint64_t seed, int k,
               const std::string& out_path) {
  const auto cfg = load_config_or_default(config_path);
  const auto world = usm::sim::generate_population(cfg.sim, seed);
  std::vector<usm::LoadedModel> models;
  std::vector<usm::rank::ArmSpec> specs;
  models.reserve(arms.size());
  for (const auto& arm : arms) {
    const std::string path =
        model_dir + "/" + arm + "_seed" + std::to_string(seed) + ".bin";
    require_file(path, "model");
    models.push_back(usm::load_model(path));
    specs.push_back({arm, &models.back().net, cfg.rank_eval.weights});
  }
  const auto rates = usm::rank::ab_rank_eval(
      world, specs, k, cfg.rank_eval.n_requests, cfg.rank_eval.n_candidates,
      usm::stream_seed(seed, 0x4Bu));

  std::ostringstream csv;
  csv << "arm,metric,value\n";
  for (const auto& r : rates) {
    csv << r.name << ",like_rate," << usm::metrics::format_value(r.like_rate)
        << "\n";
    for (const auto& [opt, rate] : r.option_rates)
      csv << r.name << "," << opt << "_rate,"
          << usm::metrics::format_value(rate) << "\n";
  }
  if (out_path.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(out_path, std::ios::binary);
    out << csv.str();
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int cmd_feature_importance(const std::string& model_path,
                           const std::string& data_dir,
                           std::vector<std::string> features) {
  require_file(model_path, "model");
  require_file(data_dir + "/manifest.json", "dataset");
  auto loaded = usm::load_model(model_path);
  const auto events = usm::data::load_events(data_dir + "/eval.jsonl");
  const auto labeled =
      loaded.kind == "submit"
          ? usm::build_submit_examples(events, loaded.net)
          : usm::build_survey_examples(events, loaded.net);
  if (features.empty()) {
    features = loaded.net.config().features;
    features.insert(features.end(), {"user_id", "item_id", "author_id"});
  }
  const auto ranked =
      loaded.net.feature_importance(labeled.examples, features);
  std::cout << "feature,auc_drop\n";
  for (const auto& fi : ranked)
    std::cout << fi.feature << "," << usm::metrics::format_value(fi.auc_drop)
              << "\n";
  return 0;
}

int cmd_grad_check(const std::string& topology, std::uint64_t seed,
                   int batch_size, int n_coords) {
  usm::SurveyModelConfig cfg;
  cfg.heads = usm::default_survey_heads();
  const auto flags = usm::harness::arm_flags(
      topology == "baseline" ? "baseline" : topology);
  cfg.use_lhuc = flags.lhuc;
  cfg.use_se = flags.se;
  const auto schema = usm::FeatureSchema::standard(4, 5, 3);
  usm::SurveyNet net(cfg, schema, seed);

  usm::Rng rng(usm::stream_seed(seed, 0x6Cu));
  std::vector<usm::WeightedExample> batch;
  for (int i = 0; i < batch_size; ++i) {
    usm::WeightedExample ex;
    ex.features.user_id = rng.next_u64();
    ex.features.item_id = rng.next_u64();
    ex.features.author_id = rng.next_u64();
    ex.features.raw.resize(net.layout().dim);
    for (auto& x : ex.features.raw) x = rng.normal();
    ex.labels.assign(cfg.heads.size(), usm::kLabelNA);
    ex.labels[rng.below(cfg.heads.size())] = rng.bernoulli(0.5) ? 1 : 0;
    ex.sample_weight = rng.uniform(0.5, 2.0);
    batch.push_back(std::move(ex));
  }
  const auto result = net.grad_check(batch, 1e-4, n_coords, seed);
  std::cout << "topology=" << topology
            << " max_rel_error=" << result.max_rel_error << " ("
            << result.checked << " coords, worst tensor "
            << (result.worst_tensor.empty() ? "-" : result.worst_tensor)
            << ")\n";
  return result.max_rel_error <= 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unbiased survey modeling sandbox"};
  app.require_subcommand(1);

  std::string config_path, data_dir = "data", model_dir = "models";
  std::string out_dir = "out", out_path, model_path, requests_path;
  std::string arm = "baseline", topology = "baseline";
  std::vector<std::string> arms = {"baseline"};
  std::vector<std::string> features;
  std::uint64_t seed = 1;
  int k = 10, batch_size = 8, n_coords = 200;

  auto* sim_cmd = app.add_subcommand("simulate", "generate a dataset");
  sim_cmd->add_option("--config", config_path, "experiment config (toml/json)");
  sim_cmd->add_option("--seed", seed, "world seed");
  sim_cmd->add_option("--out", out_dir, "output dataset directory")
      ->required();

  auto* train_cmd = app.add_subcommand("train", "train one arm");
  train_cmd->add_option("--config", config_path, "experiment config");
  train_cmd->add_option("--data", data_dir, "dataset directory")->required();
  train_cmd->add_option("--arm", arm,
                        "baseline|lhuc|se|lhuc_se|debias|...|submit");
  train_cmd->add_option("--seed", seed, "run seed");
  train_cmd->add_option("--models", model_dir, "model output directory");

  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate trained arms");
  eval_cmd->add_option("--config", config_path, "experiment config");
  eval_cmd->add_option("--data", data_dir, "dataset directory")->required();
  eval_cmd->add_option("--models", model_dir, "model directory");
  eval_cmd->add_option("--arms", arms, "arm names")->delimiter(',');
  eval_cmd->add_option("--seed", seed, "run seed");
  eval_cmd->add_option("--out", out_dir, "report output directory");

  auto* rank_cmd = app.add_subcommand("rank", "batch-rank candidates");
  rank_cmd->add_option("--model", model_path, "survey model file")
      ->required();
  rank_cmd->add_option("--requests", requests_path, "requests JSON")
      ->required();
  rank_cmd->add_option("-k", k, "top-k size");
  rank_cmd->add_option("--out", out_path, "response JSON path");

  auto* ab_cmd = app.add_subcommand("abtest", "offline ranking A/B");
  ab_cmd->add_option("--config", config_path, "experiment config");
  ab_cmd->add_option("--arms", arms, "arm names")->delimiter(',');
  ab_cmd->add_option("--models", model_dir, "model directory");
  ab_cmd->add_option("--seed", seed, "world seed");
  ab_cmd->add_option("-k", k, "top-k size");
  ab_cmd->add_option("--out", out_path, "CSV output path");

  auto* fi_cmd =
      app.add_subcommand("feature-importance", "masking-based importance");
  fi_cmd->add_option("--model", model_path, "model file")->required();
  fi_cmd->add_option("--data", data_dir, "dataset directory")->required();
  fi_cmd->add_option("--features", features, "features to mask")
      ->delimiter(',');

  auto* gc_cmd = app.add_subcommand("grad-check", "finite-difference check");
  gc_cmd->add_option("--topology", topology, "baseline|lhuc|se|lhuc_se");
  gc_cmd->add_option("--seed", seed, "seed");
  gc_cmd->add_option("--batch", batch_size, "batch size");
  gc_cmd->add_option("--coords", n_coords, "coordinates to test");

  auto* exp_cmd = app.add_subcommand("experiment", "full multi-arm run");
  exp_cmd->add_option("--config", config_path, "experiment config");
  exp_cmd->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (sim_cmd->parsed()) return cmd_simulate(config_path, seed, out_dir);
    if (train_cmd->parsed())
      return cmd_train(config_path, data_dir, arm, seed, model_dir);
    if (eval_cmd->parsed())
      return cmd_evaluate(config_path, data_dir, model_dir, arms, seed,
                          out_dir);
    if (rank_cmd->parsed()) return cmd_rank(model_path, requests_path, k,
                                            out_path);
    if (ab_cmd->parsed())
      return cmd_abtest(config_path, arms, model_dir, seed, k, out_path);
    if (fi_cmd->parsed())
      return cmd_feature_importance(model_path, data_dir, features);
    if (gc_cmd->parsed())
      return cmd_grad_check(topology, seed, batch_size, n_coords);
    if (exp_cmd->parsed()) {
      const auto cfg = load_config_or_default(config_path);
      usm::harness::run_experiment(cfg, out_dir);
      std::cout << "wrote " << out_dir << "/report.csv\n";
      return 0;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
