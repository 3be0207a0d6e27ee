#include "usm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace usm::sim {

const char* engagement_name(Engagement e) {
  switch (e) {
    case Engagement::none: return "none";
    case Engagement::like: return "like";
    case Engagement::dislike: return "dislike";
    case Engagement::report: return "report";
  }
  return "?";
}

Engagement engagement_from_name(const std::string& name) {
  if (name == "none") return Engagement::none;
  if (name == "like") return Engagement::like;
  if (name == "dislike") return Engagement::dislike;
  if (name == "report") return Engagement::report;
  throw std::invalid_argument("unknown engagement: " + name);
}

const std::vector<std::string>& options_of_kind(const std::string& kind) {
  static const std::vector<std::string> sexual = {"sexual"};
  static const std::vector<std::string> inappropriate = {"inappropriate",
                                                         "violent", "spam"};
  if (kind == "satisfaction") return kSatisfactionOptions;
  if (kind == "sexual") return sexual;
  if (kind == "inappropriate") return inappropriate;
  throw std::invalid_argument("unknown survey kind: " + kind);
}

void SimConfig::validate() const {
  if (users < 1 || items < 1 || authors < 1)
    throw std::invalid_argument("population counts must be >= 1");
  if (latent_dim < 0) throw std::invalid_argument("latent_dim must be >= 0");
  if (impressions_per_user < 1)
    throw std::invalid_argument("impressions_per_user must be >= 1");
  if (survey_show_prob < 0.0 || survey_show_prob > 1.0)
    throw std::invalid_argument("survey_show_prob must be in [0,1]");
  if (kind_mix.size() != kSurveyKinds.size())
    throw std::invalid_argument("kind_mix must have one entry per kind");
  if (confound_rho < -1.0 || confound_rho > 1.0)
    throw std::invalid_argument("confound_rho must be in [-1,1]");
  for (const auto& probs : {language_probs, region_probs, device_probs})
    if (probs.empty())
      throw std::invalid_argument("attribute distribution empty");
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

int pick_category(Rng& rng, const std::vector<double>& probs) {
  return static_cast<int>(rng.weighted_pick(probs));
}

}  // namespace

const SimUser& World::user_by_id(std::uint64_t id) const {
  if (id < 1 || id > users.size())
    throw std::out_of_range("unknown user id");
  return users[id - 1];
}

const SimItem& World::item_by_id(std::uint64_t id) const {
  if (id < 1 || id > items.size())
    throw std::out_of_range("unknown item id");
  return items[id - 1];
}

double World::pref_logit(const SimUser& u, const SimItem& i) const {
  const int d = config.latent_dim;
  double dot = 0.0;
  for (int k = 0; k < d; ++k) dot += u.pref[k] * i.quality[k];
  double mod = 0.0;
  if (config.attr_strength != 0.0) {
    const int codes[3] = {u.language, u.region, u.device};
    for (int a = 0; a < 3; ++a) {
      const auto row = attr_mod[a].row(static_cast<std::size_t>(codes[a]));
      for (int k = 0; k < d; ++k) mod += row[k] * i.quality[k];
    }
  }
  const double scale = d > 0 ? 1.0 / std::sqrt(static_cast<double>(d)) : 0.0;
  return config.pref_scale * dot * scale + mod * scale + u.sat_bias +
         config.pref_bias;
}

double World::p_like_ans(const SimUser& u, const SimItem& i) const {
  return sigmoid(pref_logit(u, i));
}

double World::p_dont_ans(const SimUser& u, const SimItem& i) const {
  const double pl = p_like_ans(u, i);
  return (1.0 - pl) * sigmoid(config.dont_gap - pref_logit(u, i));
}

double World::p_ans_ss(const SimUser& u) const {
  return sigmoid(u.temperament + config.activity_weight * u.activity);
}

double World::issue_answer_logit(const SimUser& u, const SimItem& i,
                                 const std::string& option) const {
  for (std::size_t o = 0; o < kIssueOptions.size(); ++o) {
    if (kIssueOptions[o] != option) continue;
    return config.issue_bias +
           config.issue_intensity_w * logit(i.issue_intensity[o]) +
           config.issue_sens_w * u.issue_sensitivity;
  }
  throw std::invalid_argument("unknown issue option: " + option);
}

double World::p_issue_ans(const SimUser& u, const SimItem& i,
                          const std::string& option) const {
  return sigmoid(issue_answer_logit(u, i, option));
}

double World::p_option_ans(const SimUser& u, const SimItem& i,
                           const std::string& kind,
                           const std::string& option) const {
  if (kind == "satisfaction") {
    if (option == "like") return p_like_ans(u, i);
    if (option == "dont_like") return p_dont_ans(u, i);
    if (option == "neutral")
      return 1.0 - p_like_ans(u, i) - p_dont_ans(u, i);
    throw std::invalid_argument("unknown satisfaction option: " + option);
  }
  return p_issue_ans(u, i, option);
}

World generate_population(const SimConfig& config, std::uint64_t seed) {
  config.validate();
  World world;
  world.config = config;
  world.seed = seed;
  const int d = config.latent_dim;

  // satisfaction driver s = sat_bias + pref[0]; analytic moments keep the
  // standardization independent of the sampled population
  const double driver_mean = config.pref_mean0;
  const double driver_sd =
      std::sqrt(config.sat_bias_sd * config.sat_bias_sd + (d > 0 ? 1.0 : 0.0));
  const double rho = config.confound_rho;

  world.users.reserve(static_cast<std::size_t>(config.users));
  for (long n = 1; n <= config.users; ++n) {
    Rng rng(stream_seed(seed, 0xF00Du, static_cast<std::uint64_t>(n)));
    SimUser u;
    u.id = static_cast<std::uint64_t>(n);
    u.language = pick_category(rng, config.language_probs);
    u.region = pick_category(rng, config.region_probs);
    u.device = pick_category(rng, config.device_probs);
    u.activity = rng.normal();
    u.pref.resize(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) u.pref[k] = rng.normal();
    if (d > 0) u.pref[0] += config.pref_mean0;
    if (d > 1) u.pref[1] += config.pref_mean1;
    u.sat_bias = config.sat_bias_sd * rng.normal();
    u.issue_sensitivity = rng.normal();
    const double driver = u.sat_bias + (d > 0 ? u.pref[0] : 0.0);
    const double z = driver_sd > 0.0 ? (driver - driver_mean) / driver_sd : 0.0;
    const double noise = rng.normal();
    u.temperament =
        config.temperament_bias +
        config.temperament_scale *
            (rho * z + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * noise);
    world.users.push_back(std::move(u));
  }

  world.items.reserve(static_cast<std::size_t>(config.items));
  for (long n = 1; n <= config.items; ++n) {
    Rng rng(stream_seed(seed, 0x17E11u, static_cast<std::uint64_t>(n)));
    SimItem it;
    it.id = static_cast<std::uint64_t>(n);
    it.author_id = 1 + rng.below(static_cast<std::uint64_t>(config.authors));
    it.quality.resize(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) it.quality[k] = rng.normal();
    if (d > 0) it.quality[0] += config.quality_mean0;
    it.issue_intensity.resize(kIssueOptions.size());
    for (std::size_t o = 0; o < kIssueOptions.size(); ++o) {
      const auto base = config.option_base_rate.find(kIssueOptions[o]);
      const double base_rate =
          base == config.option_base_rate.end() ? 0.05 : base->second;
      it.issue_intensity[o] =
          sigmoid(logit(base_rate) + config.intensity_logit_sd * rng.normal());
    }
    world.items.push_back(std::move(it));
  }

  const std::size_t sizes[3] = {config.language_probs.size(),
                                config.region_probs.size(),
                                config.device_probs.size()};
  world.attr_mod.resize(3);
  for (int a = 0; a < 3; ++a) {
    Rng rng(stream_seed(seed, 0xA77Au, static_cast<std::uint64_t>(a)));
    world.attr_mod[a] = Matrix(sizes[a], static_cast<std::size_t>(d));
    for (double& x : world.attr_mod[a].data)
      x = config.attr_strength * rng.normal();
  }
  return world;
}

std::vector<ImpressionEvent> simulate_feed(const World& world,
                                           std::uint64_t seed) {
  const SimConfig& cfg = world.config;
  cfg.validate();
  std::vector<ImpressionEvent> events;
  events.reserve(world.users.size() *
                 static_cast<std::size_t>(cfg.impressions_per_user));

  for (const SimUser& u : world.users) {
    Rng rng(stream_seed(seed, 0xFEEDu, u.id));
    int submit_history = 0;
    for (int idx = 0; idx < cfg.impressions_per_user; ++idx) {
      const SimItem& item =
          world.items[rng.below(static_cast<std::uint64_t>(world.items.size()))];
      ImpressionEvent ev;
      ev.user_id = u.id;
      ev.impression_index = idx;
      ev.item_id = item.id;
      ev.author_id = item.author_id;
      ev.attrs = {u.language, u.region,  u.device,
                  u.activity, submit_history, idx};

      const double pl = world.pref_logit(u, item);
      // negative engagement shares the inappropriate-answer driver, which
      // is what makes reports/dislikes usable as implicit ground truth
      const double issue_load =
          world.issue_answer_logit(u, item, "inappropriate");
      const double p_like_eng = sigmoid(cfg.like_bias + cfg.eng_pref_w * pl);
      const double p_dislike = sigmoid(cfg.dislike_bias - cfg.eng_pref_w * pl +
                                       cfg.eng_issue_w * issue_load);
      const double p_report =
          sigmoid(cfg.report_bias + 1.2 * cfg.eng_issue_w * issue_load);
      if (rng.bernoulli(p_like_eng))
        ev.engagement = Engagement::like;
      else if (rng.bernoulli(p_dislike))
        ev.engagement = Engagement::dislike;
      else if (rng.bernoulli(p_report))
        ev.engagement = Engagement::report;

      ev.oracle.p_ans_ss = world.p_ans_ss(u);
      ev.oracle.p_like_ans = world.p_like_ans(u, item);
      ev.oracle.p_like_ss = ev.oracle.p_like_ans * ev.oracle.p_ans_ss;
      ev.oracle.pref_logit = pl;

      if (rng.bernoulli(cfg.survey_show_prob)) {
        ev.survey.shown = true;
        // kind alternates by hash so each kind gets coverage regardless of
        // the rest of the stream
        const double pick =
            static_cast<double>(
                mix64(stream_seed(seed, u.id,
                                  static_cast<std::uint64_t>(idx) ^
                                      0x6B1Du)) >>
                11) *
            0x1.0p-53;
        double total = 0.0;
        for (double w : cfg.kind_mix) total += w;
        double x = pick * total;
        std::size_t kind_idx = cfg.kind_mix.size() - 1;
        for (std::size_t kk = 0; kk < cfg.kind_mix.size(); ++kk) {
          x -= cfg.kind_mix[kk];
          if (x < 0.0) {
            kind_idx = kk;
            break;
          }
        }
        ev.survey.kind = kSurveyKinds[kind_idx];

        const auto& options = options_of_kind(ev.survey.kind);
        for (const auto& opt : options)
          ev.oracle.p_options.emplace_back(
              opt, world.p_option_ans(u, item, ev.survey.kind, opt));

        ev.survey.submitted = rng.bernoulli(ev.oracle.p_ans_ss);
        if (ev.survey.submitted) {
          ++submit_history;
          if (ev.survey.kind == "satisfaction") {
            const double r = rng.uniform();
            const double p_like = ev.oracle.p_like_ans;
            const double p_dont = world.p_dont_ans(u, item);
            if (r < p_like)
              ev.survey.answers.push_back("like");
            else if (r < p_like + p_dont)
              ev.survey.answers.push_back("dont_like");
            else
              ev.survey.answers.push_back("neutral");
          } else {
            for (const auto& [opt, p] : ev.oracle.p_options)
              if (rng.bernoulli(p)) ev.survey.answers.push_back(opt);
          }
        }
      }
      events.push_back(std::move(ev));
    }
  }
  return events;
}

}  // namespace usm::sim
