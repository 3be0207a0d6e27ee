#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "usm/dataset.hpp"
#include "usm/simulator.hpp"

using namespace usm;
using namespace usm::sim;

namespace {

SimConfig small_world() {
  SimConfig cfg;
  cfg.users = 400;
  cfg.items = 200;
  cfg.authors = 40;
  cfg.impressions_per_user = 30;
  return cfg;
}

struct LikeRates {
  double raw = 0.0;       // like submits / submits (satisfaction kind)
  double truth = 0.0;     // mean P(like|ans) over satisfaction shows
  double ipw = 0.0;       // oracle-propensity weighted estimate
  long submits = 0;
};

LikeRates satisfaction_rates(const std::vector<ImpressionEvent>& events) {
  LikeRates r;
  double truth_sum = 0.0;
  long shows = 0, likes = 0;
  double w_sum = 0.0, w_like = 0.0;
  for (const auto& ev : events) {
    if (!ev.survey.shown || ev.survey.kind != "satisfaction") continue;
    ++shows;
    truth_sum += ev.oracle.p_like_ans;
    if (!ev.survey.submitted) continue;
    ++r.submits;
    const bool like = std::find(ev.survey.answers.begin(),
                                ev.survey.answers.end(),
                                "like") != ev.survey.answers.end();
    if (like) ++likes;
    const double w = 1.0 / ev.oracle.p_ans_ss;
    w_sum += w;
    if (like) w_like += w;
  }
  r.raw = static_cast<double>(likes) / static_cast<double>(r.submits);
  r.truth = truth_sum / static_cast<double>(shows);
  r.ipw = w_like / w_sum;
  return r;
}

}  // namespace

TEST_CASE("generate_population: identical seeds, identical worlds") {
  const auto a = generate_population(small_world(), 3);
  const auto b = generate_population(small_world(), 3);
  REQUIRE(a.users.size() == b.users.size());
  for (std::size_t i = 0; i < a.users.size(); ++i) {
    CHECK(a.users[i].temperament == b.users[i].temperament);
    CHECK(a.users[i].language == b.users[i].language);
    for (std::size_t k = 0; k < a.users[i].pref.size(); ++k)
      CHECK(a.users[i].pref[k] == b.users[i].pref[k]);
  }
  for (std::size_t i = 0; i < a.items.size(); ++i)
    CHECK(a.items[i].issue_intensity == b.items[i].issue_intensity);

  const auto ea = simulate_feed(a, 3);
  const auto eb = simulate_feed(b, 3);
  REQUIRE(ea.size() == eb.size());
  for (std::size_t i = 0; i < ea.size(); i += 97) {
    CHECK(ea[i].item_id == eb[i].item_id);
    CHECK(ea[i].survey.shown == eb[i].survey.shown);
    CHECK(ea[i].oracle.p_like_ss == eb[i].oracle.p_like_ss);
  }
}

TEST_CASE("generate_population: attribute marginals match the config") {
  SimConfig cfg = small_world();
  cfg.users = 10000;
  cfg.region_probs = {0.5, 0.5};
  const auto world = generate_population(cfg, 11);
  long region0 = 0;
  for (const auto& u : world.users)
    if (u.region == 0) ++region0;
  CHECK(static_cast<double>(region0) / 10000.0 ==
        doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::abs(static_cast<double>(region0) / 10000.0 - 0.5) < 0.05);
}

TEST_CASE("generate_population: zero latent dim degenerates cleanly") {
  SimConfig cfg = small_world();
  cfg.latent_dim = 0;
  cfg.sat_bias_sd = 0.0;
  cfg.attr_strength = 0.0;
  const auto world = generate_population(cfg, 5);
  const double reference =
      world.pref_logit(world.users[0], world.items[0]);
  for (int i = 0; i < 20; ++i)
    CHECK(world.pref_logit(world.users[static_cast<std::size_t>(i * 7 % 400)],
                           world.items[static_cast<std::size_t>(i * 11 %
                                                                200)]) ==
          reference);
}

TEST_CASE("simulate_feed: zero show probability yields no surveys") {
  SimConfig cfg = small_world();
  cfg.survey_show_prob = 0.0;
  const auto world = generate_population(cfg, 7);
  for (const auto& ev : simulate_feed(world, 7)) {
    CHECK_FALSE(ev.survey.shown);
    CHECK_FALSE(ev.survey.submitted);
  }
}

TEST_CASE("simulate_feed: saturated temperament pushes submit rate past .999") {
  SimConfig cfg = small_world();
  cfg.temperament_bias = 10.0;
  cfg.temperament_scale = 0.0;
  cfg.survey_show_prob = 1.0;
  const auto world = generate_population(cfg, 13);
  const auto events = simulate_feed(world, 13);
  long shows = 0, submits = 0;
  for (const auto& ev : events) {
    if (!ev.survey.shown) continue;
    ++shows;
    if (ev.survey.submitted) ++submits;
  }
  CHECK(shows == 400 * 30);
  CHECK(static_cast<double>(submits) / static_cast<double>(shows) > 0.999);
}

TEST_CASE("simulate_feed: submitted implies shown, answers imply submitted") {
  const auto world = generate_population(small_world(), 17);
  for (const auto& ev : simulate_feed(world, 17)) {
    if (ev.survey.submitted) CHECK(ev.survey.shown);
    if (!ev.survey.answers.empty()) CHECK(ev.survey.submitted);
    if (ev.survey.shown)
      CHECK_FALSE(ev.survey.kind.empty());
  }
}

TEST_CASE("oracle: the submit decomposition identity holds exactly") {
  const auto world = generate_population(small_world(), 19);
  for (const auto& ev : simulate_feed(world, 19))
    CHECK(std::abs(ev.oracle.p_like_ss -
                   ev.oracle.p_like_ans * ev.oracle.p_ans_ss) <= 1e-12);
}

TEST_CASE("oracle: empirical submit rate matches mean propensity") {
  SimConfig cfg = small_world();
  cfg.users = 2000;
  cfg.impressions_per_user = 50;  // 100k impressions
  cfg.survey_show_prob = 0.5;
  const auto world = generate_population(cfg, 23);
  const auto events = simulate_feed(world, 23);
  double p_sum = 0.0;
  long shows = 0, submits = 0;
  for (const auto& ev : events) {
    if (!ev.survey.shown) continue;
    ++shows;
    p_sum += ev.oracle.p_ans_ss;
    if (ev.survey.submitted) ++submits;
  }
  const double expected = p_sum / static_cast<double>(shows);
  const double observed =
      static_cast<double>(submits) / static_cast<double>(shows);
  CHECK(std::abs(expected - observed) < 0.01);
}

TEST_CASE("confounded world: raw satisfaction rate is visibly biased") {
  SimConfig cfg;
  cfg.users = 2000;
  cfg.impressions_per_user = 50;
  cfg.survey_show_prob = 0.5;
  cfg.confound_rho = -0.8;
  const auto world = generate_population(cfg, 29);
  const auto events = simulate_feed(world, 29);
  const LikeRates rates = satisfaction_rates(events);
  INFO("raw=", rates.raw, " truth=", rates.truth, " ipw=", rates.ipw);
  CHECK(std::abs(rates.raw - rates.truth) > 0.05);
  CHECK(std::abs(rates.ipw - rates.truth) < 0.02);
}

TEST_CASE("unconfounded world: raw satisfaction rate is close to truth") {
  SimConfig cfg;
  cfg.users = 2000;
  cfg.impressions_per_user = 50;
  cfg.survey_show_prob = 0.5;
  cfg.confound_rho = 0.0;
  const auto world = generate_population(cfg, 31);
  const LikeRates rates = satisfaction_rates(simulate_feed(world, 31));
  CHECK(std::abs(rates.raw - rates.truth) < 0.03);
}

TEST_CASE("engagement correlates with inappropriate survey answers") {
  SimConfig cfg;
  cfg.users = 2000;
  cfg.impressions_per_user = 50;
  cfg.survey_show_prob = 0.6;
  cfg.kind_mix = {0.0, 0.0, 1.0};  // inappropriate surveys only
  const auto world = generate_population(cfg, 37);
  const auto events = simulate_feed(world, 37);

  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  long n = 0;
  for (const auto& ev : events) {
    if (!ev.survey.submitted) continue;
    const double x = (ev.engagement == Engagement::dislike ||
                      ev.engagement == Engagement::report)
                         ? 1.0
                         : 0.0;
    const double y =
        std::find(ev.survey.answers.begin(), ev.survey.answers.end(),
                  "inappropriate") != ev.survey.answers.end()
            ? 1.0
            : 0.0;
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
    ++n;
  }
  const double nd = static_cast<double>(n);
  const double cov = sxy / nd - (sx / nd) * (sy / nd);
  const double vx = sxx / nd - (sx / nd) * (sx / nd);
  const double vy = syy / nd - (sy / nd) * (sy / nd);
  const double r = cov / std::sqrt(vx * vy);
  INFO("pearson r = ", r, " over ", n, " submits");
  CHECK(r > 0.2);
}

TEST_CASE("export: split is user-disjoint with exact counts") {
  SimConfig cfg = small_world();
  cfg.users = 1000;
  cfg.impressions_per_user = 5;
  const auto world = generate_population(cfg, 41);
  const auto events = simulate_feed(world, 41);
  const std::string dir = "test_export_split";
  const auto manifest =
      data::export_dataset(events, cfg, {0.8, 99}, dir);
  CHECK(manifest.train_users == 800);
  CHECK(manifest.eval_users == 200);

  const auto train = data::load_events(dir + "/train.jsonl");
  const auto eval = data::load_events(dir + "/eval.jsonl");
  std::set<std::uint64_t> train_users, eval_users;
  for (const auto& ev : train) train_users.insert(ev.user_id);
  for (const auto& ev : eval) eval_users.insert(ev.user_id);
  CHECK(train_users.size() == 800);
  CHECK(eval_users.size() == 200);
  for (std::uint64_t uid : eval_users) CHECK(train_users.count(uid) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("export: events round-trip field-identical") {
  SimConfig cfg = small_world();
  cfg.users = 50;
  cfg.impressions_per_user = 10;
  cfg.survey_show_prob = 0.8;
  const auto world = generate_population(cfg, 43);
  const auto events = simulate_feed(world, 43);
  const std::string dir = "test_export_roundtrip";
  data::export_dataset(events, cfg, {0.8, 1}, dir);

  auto loaded = data::load_events(dir + "/train.jsonl");
  auto eval = data::load_events(dir + "/eval.jsonl");
  loaded.insert(loaded.end(), eval.begin(), eval.end());
  REQUIRE(loaded.size() == events.size());

  std::map<std::pair<std::uint64_t, long>, const ImpressionEvent*> by_key;
  for (const auto& ev : loaded)
    by_key[{ev.user_id, ev.impression_index}] = &ev;
  for (const auto& ev : events) {
    const auto* got = by_key.at({ev.user_id, ev.impression_index});
    CHECK(got->item_id == ev.item_id);
    CHECK(got->author_id == ev.author_id);
    CHECK(got->attrs.language == ev.attrs.language);
    CHECK(got->attrs.activity == ev.attrs.activity);
    CHECK(got->attrs.submit_history == ev.attrs.submit_history);
    CHECK(got->engagement == ev.engagement);
    CHECK(got->survey.shown == ev.survey.shown);
    CHECK(got->survey.kind == ev.survey.kind);
    CHECK(got->survey.submitted == ev.survey.submitted);
    CHECK(got->survey.answers == ev.survey.answers);
    // oracle fields must NOT travel with events
    CHECK(got->oracle.p_ans_ss == 0.0);
  }

  const auto oracle = data::load_oracle(dir + "/oracle.jsonl");
  REQUIRE(oracle.size() == events.size());
  for (const auto& ev : events) {
    const auto& row = oracle.at({ev.user_id, ev.impression_index});
    CHECK(row.p_ans_ss == ev.oracle.p_ans_ss);
    CHECK(row.p_like_ans == ev.oracle.p_like_ans);
    CHECK(row.p_like_ss == ev.oracle.p_like_ss);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("export: empty event list is an I/O error") {
  CHECK_THROWS_AS(
      data::export_dataset({}, SimConfig{}, {0.8, 1}, "test_export_empty"),
      data::IoError);
}
