#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "usm/harness.hpp"
#include "usm/labeling.hpp"
#include "usm/serialize.hpp"

using namespace usm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig smoke_config() {
  ExperimentConfig cfg = default_experiment_config();
  cfg.sim.users = 120;
  cfg.sim.items = 60;
  cfg.sim.authors = 12;
  cfg.sim.impressions_per_user = 20;
  cfg.sim.survey_show_prob = 0.7;
  cfg.survey_model.backbone_dims = {16, 8};
  cfg.survey_model.head_dims = {4, 1};
  cfg.survey_model.embedding_dim = 4;
  cfg.survey_model.hash_bits = 6;
  cfg.submit_model.backbone_dims = {16, 8};
  cfg.submit_model.head_dims = {4, 1};
  cfg.submit_model.embedding_dim = 4;
  cfg.submit_model.hash_bits = 6;
  cfg.train.epochs = 1;
  cfg.train.batch_size = 64;
  cfg.submit_train = cfg.train;
  cfg.arms = {"baseline", "lhuc_se_debias"};
  cfg.seeds = {1};
  cfg.rank_eval.n_requests = 40;
  cfg.rank_eval.n_candidates = 20;
  return cfg;
}

}  // namespace

TEST_CASE("toml subset: tables, arrays, scalars, comments") {
  const std::string text = R"(
# experiment file
title = "smoke"
[simulator]
users = 500          # inline comment
survey_show_prob = 0.4
kind_mix = [1.0, 0.5, 0.5]
[experiment]
arms = ["baseline", "lhuc"]
seeds = [1, 2]
[ranking.weights]
satisfaction = -1.5
)";
  const auto j = parse_toml(text);
  CHECK(j.at("title") == "smoke");
  CHECK(j.at("simulator").at("users") == 500);
  CHECK(j.at("simulator").at("survey_show_prob") == 0.4);
  CHECK(j.at("simulator").at("kind_mix").size() == 3);
  CHECK(j.at("experiment").at("arms")[1] == "lhuc");
  CHECK(j.at("ranking").at("weights").at("satisfaction") == -1.5);

  CHECK_THROWS_AS(parse_toml("key"), ConfigParseError);
  CHECK_THROWS_AS(parse_toml("a = "), ConfigParseError);
  CHECK_THROWS_AS(parse_toml("[t\nx = 1"), ConfigParseError);
}

TEST_CASE("experiment config: toml and json front ends agree") {
  const std::string toml_text = R"(
[simulator]
users = 333
confound_rho = -0.8
[model]
backbone_dims = [32, 16, 8]
embedding_dim = 4
[train]
epochs = 2
learning_rate = 0.005
optimizer = "adam"
[experiment]
arms = ["baseline", "debias"]
seeds = [4, 5]
)";
  const auto from_toml = experiment_config_from_json(parse_toml(toml_text));
  CHECK(from_toml.sim.users == 333);
  CHECK(from_toml.sim.confound_rho == -0.8);
  CHECK(from_toml.survey_model.backbone_dims ==
        std::vector<int>{32, 16, 8});
  CHECK(from_toml.submit_model.backbone_dims ==
        std::vector<int>{32, 16, 8});
  CHECK(from_toml.train.epochs == 2);
  CHECK(from_toml.train.optimizer.learning_rate == 0.005);
  CHECK(from_toml.arms == std::vector<std::string>{"baseline", "debias"});
  CHECK(from_toml.seeds == std::vector<std::uint64_t>{4, 5});

  // same document as JSON
  nlohmann::json j;
  j["simulator"]["users"] = 333;
  j["simulator"]["confound_rho"] = -0.8;
  j["model"]["backbone_dims"] = {32, 16, 8};
  j["model"]["embedding_dim"] = 4;
  j["train"]["epochs"] = 2;
  j["train"]["learning_rate"] = 0.005;
  j["train"]["optimizer"] = "adam";
  j["experiment"]["arms"] = {"baseline", "debias"};
  j["experiment"]["seeds"] = {4, 5};
  const auto from_json = experiment_config_from_json(j);
  CHECK(from_json.sim.users == from_toml.sim.users);
  CHECK(from_json.train.epochs == from_toml.train.epochs);
  CHECK(from_json.arms == from_toml.arms);
}

TEST_CASE("arm names parse into module flags") {
  CHECK_FALSE(harness::arm_flags("baseline").lhuc);
  CHECK(harness::arm_flags("lhuc").lhuc);
  CHECK(harness::arm_flags("lhuc_se").se);
  CHECK(harness::arm_flags("lhuc_se_debias").debias);
  CHECK(harness::arm_flags("debias").debias);
  CHECK_FALSE(harness::arm_flags("debias").lhuc);
  CHECK_THROWS(harness::arm_flags("bogus"));
}

TEST_CASE("labeling: survey samples label exactly their kind's heads") {
  sim::ImpressionEvent ev;
  ev.user_id = 1;
  ev.item_id = 2;
  ev.author_id = 3;
  ev.survey.shown = true;
  ev.survey.kind = "inappropriate";
  ev.survey.submitted = true;
  ev.survey.answers = {"violent"};

  SurveyModelConfig cfg;
  cfg.backbone_dims = {8, 4};
  cfg.head_dims = {3, 1};
  cfg.heads = default_survey_heads();
  cfg.embedding_dim = 2;
  cfg.hash_bits = 4;
  SurveyNet net(cfg, FeatureSchema::standard(4, 5, 3), 1);

  const auto labeled = build_survey_examples({ev}, net);
  REQUIRE(labeled.examples.size() == 1);
  const auto& labels = labeled.examples[0].labels;
  REQUIRE(labels.size() == 5);
  CHECK(labels[net.head_index("satisfaction")] == kLabelNA);
  CHECK(labels[net.head_index("sexual")] == kLabelNA);
  CHECK(labels[net.head_index("inappropriate")] == 0);
  CHECK(labels[net.head_index("violent")] == 1);
  CHECK(labels[net.head_index("spam")] == 0);

  // satisfaction sample: "I don't like it" is the positive label
  sim::ImpressionEvent sat = ev;
  sat.survey.kind = "satisfaction";
  sat.survey.answers = {"dont_like"};
  const auto sat_labeled = build_survey_examples({sat}, net);
  CHECK(sat_labeled.examples[0].labels[net.head_index("satisfaction")] == 1);
  sat.survey.answers = {"like"};
  CHECK(build_survey_examples({sat}, net)
            .examples[0]
            .labels[net.head_index("satisfaction")] == 0);

  // non-submitted shows produce no survey examples
  sim::ImpressionEvent shown_only = ev;
  shown_only.survey.submitted = false;
  shown_only.survey.answers.clear();
  CHECK(build_survey_examples({shown_only}, net).examples.empty());
}

TEST_CASE("run_experiment: smoke run populates every configured metric") {
  const std::string dir = "test_exp_smoke";
  fs::remove_all(dir);
  const auto rows = harness::run_experiment(smoke_config(), dir);

  CHECK(fs::exists(dir + "/report.csv"));
  CHECK(fs::exists(dir + "/report_per_seed.csv"));
  CHECK(fs::exists(dir + "/report.json"));
  CHECK(fs::exists(dir + "/models/baseline_seed1.bin"));
  CHECK(fs::exists(dir + "/models/lhuc_se_debias_seed1.bin"));
  CHECK(fs::exists(dir + "/models/submit_seed1.bin"));

  bool has_auc = false, has_uauc = false, has_rate = false, has_rank = false;
  for (const auto& r : rows) {
    if (r.metric == "auc" && r.arm == "baseline" && r.stratum.empty())
      has_auc = true;
    if (r.metric == "uauc") has_uauc = true;
    if (r.metric == "rate_debiased") has_rate = true;
    if (r.metric == "rank_inappropriate_rate") has_rank = true;
  }
  CHECK(has_auc);
  CHECK(has_uauc);
  CHECK(has_rate);
  CHECK(has_rank);
  fs::remove_all(dir);
}

TEST_CASE("run_experiment: identical configs give byte-identical reports") {
  const std::string a = "test_exp_det_a", b = "test_exp_det_b";
  fs::remove_all(a);
  fs::remove_all(b);
  ExperimentConfig cfg = smoke_config();
  cfg.arms = {"baseline"};
  harness::run_experiment(cfg, a);
  harness::run_experiment(cfg, b);
  CHECK(slurp(a + "/report.csv") == slurp(b + "/report.csv"));
  CHECK(slurp(a + "/report_per_seed.csv") == slurp(b + "/report_per_seed.csv"));
  CHECK(slurp(a + "/report.json") == slurp(b + "/report.json"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("stage isolation: the staged pipeline equals the monolithic run") {
  const std::string mono = "test_exp_mono", staged = "test_exp_staged";
  fs::remove_all(mono);
  fs::remove_all(staged);
  ExperimentConfig cfg = smoke_config();
  cfg.arms = {"baseline", "debias"};
  cfg.rank_eval.enabled = false;
  harness::run_experiment(cfg, mono);

  // rebuild the same artifacts through the stage functions
  fs::create_directories(staged + "/models");
  const std::uint64_t seed = cfg.seeds[0];
  const auto events = harness::stage_simulate(cfg, seed);
  harness::stage_export(events, cfg, staged + "/data_seed1");
  const auto manifest = data::load_manifest(staged + "/data_seed1");
  const auto schema = manifest.feature_schema();
  const auto train_events =
      data::load_events(staged + "/data_seed1/train.jsonl");
  const auto submit_net =
      harness::stage_train_submit(train_events, cfg, schema, seed);
  save_model(submit_net, "submit", staged + "/models/submit_seed1.bin");
  for (const std::string arm : {"baseline", "debias"}) {
    const auto net = harness::stage_train_arm(train_events, cfg, schema, arm,
                                              seed, &submit_net);
    save_model(net, "survey", staged + "/models/" + arm + "_seed1.bin");
  }

  for (const std::string f :
       {"data_seed1/train.jsonl", "data_seed1/eval.jsonl",
        "data_seed1/oracle.jsonl", "models/submit_seed1.bin",
        "models/baseline_seed1.bin", "models/debias_seed1.bin"}) {
    INFO("artifact ", f);
    CHECK(slurp(mono + "/" + f) == slurp(staged + "/" + f));
  }
  fs::remove_all(mono);
  fs::remove_all(staged);
}

TEST_CASE("run_experiment: a failing stage removes partial outputs") {
  ExperimentConfig cfg = smoke_config();
  cfg.sim.survey_show_prob = 0.0;  // no shows -> submit training must fail
  const std::string dir = "test_exp_fail";
  fs::remove_all(dir);
  CHECK_THROWS_AS(harness::run_experiment(cfg, dir), harness::StageError);
  CHECK_FALSE(fs::exists(dir + "/report.csv"));
  CHECK_FALSE(fs::exists(dir + "/models/submit_seed1.bin"));
  fs::remove_all(dir);
}

TEST_CASE("train stage: debias without a submit model names the dependency") {
  ExperimentConfig cfg = smoke_config();
  const auto events = harness::stage_simulate(cfg, 1);
  const auto schema = FeatureSchema::standard(4, 5, 3);
  try {
    harness::stage_train_arm(events, cfg, schema, "debias", 1, nullptr);
    FAIL("expected StageError");
  } catch (const harness::StageError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("submit model") != std::string::npos);
  }
}
