#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "usm/dataset.hpp"
#include "usm/labeling.hpp"
#include "usm/metrics.hpp"
#include "usm/simulator.hpp"
#include "usm/submit_model.hpp"

using namespace usm;

namespace {

SurveyModelConfig submit_config() {
  SurveyModelConfig cfg;
  cfg.backbone_dims = {24, 12, 8};
  cfg.head_dims = {6, 1};
  cfg.heads = default_submit_heads();
  cfg.features = {"language", "region", "device", "activity",
                  "submit_history"};
  cfg.embedding_dim = 4;
  cfg.hash_bits = 8;
  return cfg;
}

TrainConfig quick_train() {
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 128;
  return tc;
}

}  // namespace

TEST_CASE("propensity arithmetic and clipping") {
  CHECK(make_propensity("satisfaction", 0.25, 0.01).ipw_weight ==
        doctest::Approx(4.0));
  CHECK(make_propensity("satisfaction", 0.001, 0.01).ipw_weight ==
        doctest::Approx(100.0));
  CHECK(make_propensity("satisfaction", 1.0, 0.01).ipw_weight ==
        doctest::Approx(1.0));
  // weights never exceed 1/clip_floor
  for (double p : {1e-9, 0.005, 0.2, 0.9999})
    CHECK(make_propensity("x", p).ipw_weight <= 1.0 / kDefaultClipFloor);
  CHECK_THROWS(make_propensity("x", 0.5, 0.0));
}

TEST_CASE("debiased_issue_rate: direct arithmetic") {
  // submits: (no issue, 0.5), (issue, 0.25) -> 4 / (2 + 4)
  const std::vector<std::pair<bool, double>> submits = {{false, 0.5},
                                                        {true, 0.25}};
  CHECK(debiased_issue_rate(submits) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("debiased_issue_rate: equal predictions collapse to the raw rate") {
  std::vector<std::pair<bool, double>> submits;
  for (int i = 0; i < 40; ++i) submits.emplace_back(i % 5 == 0, 0.37);
  CHECK(debiased_issue_rate(submits) == doctest::Approx(8.0 / 40.0));
}

TEST_CASE("debiased_issue_rate: invariant to common scaling, bounded") {
  Rng rng(3);
  std::vector<std::pair<bool, double>> submits, scaled;
  for (int i = 0; i < 200; ++i) {
    const double p = rng.uniform(0.1, 1.0);
    const bool issue = rng.bernoulli(0.2);
    submits.emplace_back(issue, p);
    scaled.emplace_back(issue, 0.5 * p);
  }
  const double a = debiased_issue_rate(submits);
  const double b = debiased_issue_rate(scaled);
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
  CHECK(a >= 0.0);
  CHECK(a <= 1.0);
}

TEST_CASE("debiased_issue_rate: contract errors") {
  CHECK_THROWS(debiased_issue_rate({}));
  const std::vector<std::pair<bool, double>> bad = {{true, 0.0}};
  CHECK_THROWS(debiased_issue_rate(bad));
  const std::vector<std::pair<bool, double>> bad2 = {{true, 1.5}};
  CHECK_THROWS(debiased_issue_rate(bad2));
}

TEST_CASE("ht_issue_rate: recovers the show-population rate with oracle") {
  // oracle unbiasedness on the simulator (Horvitz-Thompson identity)
  sim::SimConfig cfg;
  cfg.users = 2000;
  cfg.impressions_per_user = 50;
  cfg.survey_show_prob = 0.5;
  cfg.kind_mix = {0.0, 1.0, 0.0};  // sexual kind only
  cfg.confound_rho = -0.8;
  const auto world = sim::generate_population(cfg, 71);
  const auto events = sim::simulate_feed(world, 71);

  std::vector<std::pair<bool, double>> submits;
  double truth_sum = 0.0;
  long shows = 0;
  for (const auto& ev : events) {
    if (!ev.survey.shown) continue;
    ++shows;
    truth_sum += ev.oracle.p_options[0].second;
    if (!ev.survey.submitted) continue;
    const bool issue = !ev.survey.answers.empty();
    submits.emplace_back(issue, ev.oracle.p_ans_ss);
  }
  const double truth = truth_sum / static_cast<double>(shows);
  const double ht = ht_issue_rate(submits, shows);
  const double hajek = debiased_issue_rate(submits);
  INFO("truth=", truth, " ht=", ht, " hajek=", hajek);
  CHECK(std::abs(ht - truth) < 0.02);
  CHECK(std::abs(hajek - truth) < 0.02);
  CHECK_THROWS(ht_issue_rate(submits, 0));
}

TEST_CASE("debiased_issue_rate: closer to the true rate than the raw rate") {
  // the satisfaction survey's issue option is "dont_like"; reluctant users
  // are the satisfied ones, so the raw rate overstates it
  sim::SimConfig cfg;
  cfg.users = 2000;
  cfg.impressions_per_user = 50;
  cfg.survey_show_prob = 0.5;
  cfg.kind_mix = {1.0, 0.0, 0.0};
  cfg.confound_rho = -0.8;
  const auto world = sim::generate_population(cfg, 67);
  const auto events = sim::simulate_feed(world, 67);

  std::vector<std::pair<bool, double>> submits;
  double truth_sum = 0.0;
  long shows = 0, raw_pos = 0;
  for (const auto& ev : events) {
    if (!ev.survey.shown) continue;
    ++shows;
    for (const auto& [opt, p] : ev.oracle.p_options)
      if (opt == "dont_like") truth_sum += p;
    if (!ev.survey.submitted) continue;
    const bool issue =
        std::find(ev.survey.answers.begin(), ev.survey.answers.end(),
                  "dont_like") != ev.survey.answers.end();
    if (issue) ++raw_pos;
    submits.emplace_back(issue, ev.oracle.p_ans_ss);
  }
  const double truth = truth_sum / static_cast<double>(shows);
  const double raw =
      static_cast<double>(raw_pos) / static_cast<double>(submits.size());
  const double debiased = debiased_issue_rate(submits);
  INFO("truth=", truth, " raw=", raw, " debiased=", debiased);
  CHECK(std::abs(debiased - truth) < std::abs(raw - truth));
}

TEST_CASE("train_submit: learns an activity-driven propensity") {
  sim::SimConfig cfg;
  cfg.users = 1500;
  cfg.items = 300;
  cfg.impressions_per_user = 30;
  cfg.survey_show_prob = 0.6;
  // submission driven by observables: sigmoid(2 * activity)
  cfg.temperament_bias = 0.0;
  cfg.temperament_scale = 0.0;
  cfg.activity_weight = 2.0;
  const auto world = sim::generate_population(cfg, 73);
  const auto events = sim::simulate_feed(world, 73);
  const auto split =
      static_cast<std::size_t>(0.8 * static_cast<double>(events.size()));
  std::vector<sim::ImpressionEvent> train(events.begin(),
                                          events.begin() + split);
  std::vector<sim::ImpressionEvent> held(events.begin() + split,
                                         events.end());

  const auto schema = FeatureSchema::standard(4, 5, 3);
  const SurveyNet net =
      train_submit(train, submit_config(), schema, 7, quick_train());

  std::vector<double> p;
  std::vector<int> y;
  for (const auto& ev : held) {
    if (!ev.survey.shown) continue;
    const auto rec =
        propensity(net, encode_event(ev, net.layout()), ev.survey.kind);
    p.push_back(rec.predicted);
    y.push_back(ev.survey.submitted ? 1 : 0);
  }
  CHECK(metrics::auc_pairs(p, y) > 0.7);
}

TEST_CASE("train_submit: null signal concentrates near the base rate") {
  sim::SimConfig cfg;
  cfg.users = 1200;
  cfg.items = 300;
  cfg.impressions_per_user = 25;
  cfg.survey_show_prob = 0.6;
  // constant 30% submission independent of all features
  cfg.temperament_bias = std::log(0.3 / 0.7);
  cfg.temperament_scale = 0.0;
  cfg.activity_weight = 0.0;
  const auto world = sim::generate_population(cfg, 79);
  const auto events = sim::simulate_feed(world, 79);
  // held-out users, so memorized per-user noise cannot inflate the AUC
  const auto split = data::split_events(events, {0.8, 7});
  const auto schema = FeatureSchema::standard(4, 5, 3);
  const SurveyNet net =
      train_submit(split.train, submit_config(), schema, 7, quick_train());

  std::vector<double> p;
  std::vector<int> y;
  for (const auto& ev : split.eval) {
    if (!ev.survey.shown) continue;
    const auto rec =
        propensity(net, encode_event(ev, net.layout()), ev.survey.kind);
    p.push_back(rec.predicted);
    y.push_back(ev.survey.submitted ? 1 : 0);
  }
  double mean = 0.0;
  for (double v : p) mean += v;
  mean /= static_cast<double>(p.size());
  CHECK(mean == doctest::Approx(0.3).epsilon(0.1));
  CHECK(metrics::auc_pairs(p, y) == doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::abs(metrics::auc_pairs(p, y) - 0.5) < 0.05);
}

TEST_CASE("train_submit: duplicated dataset gives the identical model") {
  sim::SimConfig cfg;
  cfg.users = 300;
  cfg.items = 100;
  cfg.impressions_per_user = 20;
  cfg.survey_show_prob = 0.5;
  const auto world = sim::generate_population(cfg, 83);
  const auto events = sim::simulate_feed(world, 83);
  const auto schema = FeatureSchema::standard(4, 5, 3);
  const SurveyNet a =
      train_submit(events, submit_config(), schema, 11, quick_train());
  const SurveyNet b =
      train_submit(events, submit_config(), schema, 11, quick_train());
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    FeatureVector fv;
    fv.user_id = rng.next_u64();
    fv.item_id = rng.next_u64();
    fv.author_id = rng.next_u64();
    fv.raw.resize(static_cast<std::size_t>(a.layout().dim));
    for (auto& x : fv.raw) x = rng.normal();
    const Vec pa = a.predict(fv);
    const Vec pb = b.predict(fv);
    for (std::size_t h = 0; h < pa.size(); ++h) CHECK(pa[h] == pb[h]);
  }
}

TEST_CASE("train_submit: single-class kind raises an error naming it") {
  sim::SimConfig cfg;
  cfg.users = 200;
  cfg.items = 50;
  cfg.impressions_per_user = 10;
  cfg.survey_show_prob = 0.5;
  cfg.temperament_bias = 10.0;  // everyone submits
  cfg.temperament_scale = 0.0;
  cfg.activity_weight = 0.0;
  const auto world = sim::generate_population(cfg, 89);
  const auto events = sim::simulate_feed(world, 89);
  const auto schema = FeatureSchema::standard(4, 5, 3);
  try {
    train_submit(events, submit_config(), schema, 1, quick_train());
    FAIL("expected a training error");
  } catch (const nn::TrainingError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("satisfaction") != std::string::npos);
  }
}

TEST_CASE("attach_ipw: constant submit model leaves uniform weights") {
  sim::SimConfig cfg;
  cfg.users = 200;
  cfg.items = 60;
  cfg.impressions_per_user = 15;
  cfg.survey_show_prob = 0.6;
  const auto world = sim::generate_population(cfg, 97);
  const auto events = sim::simulate_feed(world, 97);
  const auto schema = FeatureSchema::standard(4, 5, 3);

  // an untrained zero model predicts exactly 0.5 for every kind
  SurveyModelConfig mc = submit_config();
  SurveyNet constant_net(mc, schema, 1);
  SurveyNet::for_each_tensor(constant_net.params(),
                             [](const std::string&, std::span<double> t) {
                               std::fill(t.begin(), t.end(), 0.0);
                             });

  SurveyModelConfig sc = submit_config();
  sc.heads = default_survey_heads();
  SurveyNet survey_net(sc, schema, 2);
  auto labeled = build_survey_examples(events, survey_net);
  REQUIRE(!labeled.examples.empty());
  attach_ipw(events, constant_net, labeled);
  for (const auto& ex : labeled.examples)
    CHECK(ex.sample_weight == doctest::Approx(2.0));
}

TEST_CASE("attach_ipw: oracle weights recover the population mean") {
  // Horvitz-Thompson identity for the satisfaction label, fed with true
  // propensities instead of model outputs
  sim::SimConfig cfg;
  cfg.users = 2500;
  cfg.impressions_per_user = 40;
  cfg.survey_show_prob = 0.5;
  cfg.kind_mix = {1.0, 0.0, 0.0};
  cfg.confound_rho = -0.8;
  const auto world = sim::generate_population(cfg, 101);
  const auto events = sim::simulate_feed(world, 101);

  double truth_sum = 0.0, w_sum = 0.0, w_pos = 0.0;
  long shows = 0;
  for (const auto& ev : events) {
    if (!ev.survey.shown) continue;
    ++shows;
    double p_dont = 0.0;
    for (const auto& [opt, p] : ev.oracle.p_options)
      if (opt == "dont_like") p_dont = p;
    truth_sum += p_dont;
    if (!ev.survey.submitted) continue;
    const double w = 1.0 / ev.oracle.p_ans_ss;
    w_sum += w;
    if (std::find(ev.survey.answers.begin(), ev.survey.answers.end(),
                  "dont_like") != ev.survey.answers.end())
      w_pos += w;
  }
  const double truth = truth_sum / static_cast<double>(shows);
  const double weighted_mean = w_pos / w_sum;
  INFO("truth=", truth, " weighted=", weighted_mean);
  CHECK(std::abs(weighted_mean - truth) < 0.02);
}
