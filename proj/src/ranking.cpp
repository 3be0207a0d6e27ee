#include "usm/ranking.hpp"

#include <algorithm>
#include <set>

namespace usm::rank {

double final_score(const std::map<std::string, double>& head_probs,
                   const std::map<std::string, double>& weights,
                   double other_score) {
  double score = other_score;
  for (const auto& [head, w] : weights) {
    if (w == 0.0) continue;
    auto it = head_probs.find(head);
    if (it == head_probs.end())
      throw RankError("no prediction for weighted head " + head);
    score += w * it->second;
  }
  return score;
}

RankResult rank_top_k(const SurveyNet& net, const RankRequest& request,
                      int k) {
  if (k < 1) throw RankError("k must be >= 1");
  if (request.candidates.empty()) throw RankError("empty candidate list");
  RankResult result;
  result.k = k;
  result.items.reserve(request.candidates.size());
  for (const auto& cand : request.candidates) {
    ScoredItem item;
    item.item_id = cand.item_id;
    const Vec probs = net.predict(cand.features);
    for (std::size_t h = 0; h < net.config().heads.size(); ++h)
      item.head_probs[net.config().heads[h].name] = probs[h];
    item.final_score =
        final_score(item.head_probs, request.weights, cand.other_score);
    result.items.push_back(std::move(item));
  }
  std::stable_sort(result.items.begin(), result.items.end(),
                   [](const ScoredItem& a, const ScoredItem& b) {
                     if (a.final_score != b.final_score)
                       return a.final_score > b.final_score;
                     return a.item_id < b.item_id;
                   });
  if (result.items.size() > static_cast<std::size_t>(k))
    result.items.resize(static_cast<std::size_t>(k));
  return result;
}

std::vector<ArmRates> ab_rank_eval(const sim::World& world,
                                   std::span<const ArmSpec> arms, int k,
                                   int n_requests, int n_candidates,
                                   std::uint64_t seed) {
  if (arms.empty()) throw RankError("no arms");
  if (n_candidates < 1 || n_requests < 1)
    throw RankError("requests and candidates must be >= 1");

  std::vector<ArmRates> rates(arms.size());
  std::vector<double> like_sum(arms.size(), 0.0);
  std::vector<std::map<std::string, double>> opt_sum(arms.size());
  long selected_total = 0;

  for (int r = 0; r < n_requests; ++r) {
    Rng rng(stream_seed(seed, 0xAB7E57u, static_cast<std::uint64_t>(r)));
    const sim::SimUser& user =
        world.users[rng.below(world.users.size())];
    std::set<std::uint64_t> chosen;
    std::vector<const sim::SimItem*> items;
    while (items.size() < static_cast<std::size_t>(
                              std::min<long>(n_candidates,
                                             static_cast<long>(
                                                 world.items.size())))) {
      const auto& item = world.items[rng.below(world.items.size())];
      if (chosen.insert(item.id).second) items.push_back(&item);
    }

    // candidate sets and exogenous scores are identical across arms
    std::vector<Candidate> candidates;
    for (const auto* item : items) {
      Candidate c;
      c.item_id = item->id;
      c.other_score = world.pref_logit(user, *item);
      c.features.user_id = user.id;
      c.features.item_id = item->id;
      c.features.author_id = item->author_id;
      candidates.push_back(std::move(c));
    }

    long selected_this = 0;
    for (std::size_t a = 0; a < arms.size(); ++a) {
      RankRequest req;
      req.candidates = candidates;
      req.weights = arms[a].weights;
      Attrs attrs{user.language, user.region, user.device, user.activity, 0};
      for (auto& cand : req.candidates)
        encode_attrs(arms[a].net->layout(), attrs, cand.features.raw);
      const RankResult top = rank_top_k(*arms[a].net, req, k);
      selected_this = static_cast<long>(top.items.size());
      for (const auto& sel : top.items) {
        const auto& item = world.item_by_id(sel.item_id);
        like_sum[a] += world.p_like_ans(user, item);
        for (const auto& opt : sim::kIssueOptions)
          opt_sum[a][opt] += world.p_issue_ans(user, item, opt);
      }
    }
    selected_total += selected_this;
  }

  for (std::size_t a = 0; a < arms.size(); ++a) {
    rates[a].name = arms[a].name;
    rates[a].like_rate = like_sum[a] / static_cast<double>(selected_total);
    for (const auto& [opt, sum] : opt_sum[a])
      rates[a].option_rates[opt] = sum / static_cast<double>(selected_total);
  }
  return rates;
}

}  // namespace usm::rank
