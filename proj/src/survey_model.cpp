#include "usm/survey_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "usm/metrics.hpp"

namespace usm {

void SurveyModelConfig::validate() const {
  if (backbone_dims.empty()) throw nn::ConfigError("backbone_dims empty");
  if (head_dims.empty() || head_dims.back() != 1)
    throw nn::ConfigError("head_dims must end in 1");
  if (heads.empty()) throw nn::ConfigError("no heads configured");
  for (int d : backbone_dims)
    if (d < 1) throw nn::ConfigError("backbone dim must be >= 1");
  if (se_reduction < 1) throw nn::ConfigError("se_reduction must be >= 1");
  if (use_se && backbone_dims.back() % se_reduction != 0)
    throw nn::ConfigError("se_reduction must divide the backbone output dim");
  if (embedding_dim < 0) throw nn::ConfigError("embedding_dim must be >= 0");
  if (embedding_dim > 0 && (hash_bits < 1 || hash_bits > 30))
    throw nn::ConfigError("hash_bits out of range");
  for (const auto& f : lhuc_features) {
    if (std::find(features.begin(), features.end(), f) == features.end())
      throw nn::ConfigError("lhuc feature not in model features: " + f);
  }
}

namespace {

EmbeddingTable make_table(int hash_bits, int dim, std::uint64_t salt,
                          Rng& rng) {
  EmbeddingTable t;
  if (dim == 0) return t;
  t.buckets = std::size_t{1} << hash_bits;
  t.dim = static_cast<std::size_t>(dim);
  t.salt = salt;
  t.data.resize(t.buckets * t.dim);
  for (double& x : t.data) x = rng.uniform(-0.1, 0.1);
  return t;
}

void lookup_into(const EmbeddingTable& t, std::uint64_t id,
                 std::span<double> out) {
  if (t.dim == 0) return;
  const auto row = t.row(t.bucket_of(id));
  std::copy(row.begin(), row.end(), out.begin());
}

void scatter_into(EmbeddingTable& grad_table,
                  const EmbeddingTable& param_table, std::uint64_t id,
                  std::span<const double> d) {
  if (param_table.dim == 0) return;
  auto row = grad_table.row(param_table.bucket_of(id));
  for (std::size_t i = 0; i < row.size(); ++i) row[i] += d[i];
}

}  // namespace

SurveyNet::SurveyNet(SurveyModelConfig config, FeatureSchema schema,
                     std::uint64_t seed)
    : cfg_(std::move(config)), schema_(std::move(schema)) {
  cfg_.validate();
  layout_ = make_layout(schema_, cfg_.features);
  lhuc_raw_layout_.dim = 0;
  for (const auto& name : cfg_.lhuc_features) {
    const auto& slot = layout_.slot(name);
    lhuc_raw_layout_.slots.push_back(slot);  // offsets are into model raw
    lhuc_raw_layout_.dim += slot.width;
  }

  Rng rng(stream_seed(seed, 0x5eedu));
  // Gate and SE layers are zero-initialized and draw nothing from the RNG,
  // so models that differ only in use_lhuc/use_se share the exact same
  // embedding, backbone and head parameters for a given seed.
  params_.user_emb = make_table(cfg_.hash_bits, cfg_.embedding_dim, 0xA11CE1, rng);
  params_.item_emb = make_table(cfg_.hash_bits, cfg_.embedding_dim, 0xB0B2, rng);
  params_.author_emb =
      make_table(cfg_.hash_bits, cfg_.embedding_dim, 0xCAB3, rng);

  const std::size_t input_dim =
      3 * static_cast<std::size_t>(cfg_.embedding_dim) +
      static_cast<std::size_t>(layout_.dim);
  params_.backbone =
      nn::make_stack(input_dim, cfg_.backbone_dims, nn::Activation::relu,
                     nn::Activation::relu, rng);
  for (std::size_t h = 0; h < cfg_.heads.size(); ++h) {
    params_.heads.push_back(nn::make_stack(
        static_cast<std::size_t>(cfg_.backbone_dims.back()), cfg_.head_dims,
        nn::Activation::relu, nn::Activation::sigmoid, rng));
  }
  if (cfg_.use_lhuc) {
    const std::size_t lhuc_in =
        3 * static_cast<std::size_t>(cfg_.embedding_dim) +
        static_cast<std::size_t>(lhuc_raw_layout_.dim);
    params_.lhuc = nn::make_stack(lhuc_in, cfg_.backbone_dims,
                                  nn::Activation::two_sigmoid,
                                  nn::Activation::two_sigmoid, rng,
                                  /*zero_init=*/true);
  }
  if (cfg_.use_se) {
    const auto c = static_cast<std::size_t>(cfg_.backbone_dims.back());
    const auto r = c / static_cast<std::size_t>(cfg_.se_reduction);
    // W2 starts at zero so the excitation is exactly sigmoid(0) = 0.5 in
    // every channel; W1 must not: with both zero the relu bottleneck sits
    // at a stationary point and the module would never receive gradient.
    params_.se_w1 = Matrix(r, c, 0.0);
    const double limit = std::sqrt(6.0 / static_cast<double>(r + c));
    for (double& w : params_.se_w1.data) w = rng.uniform(-limit, limit);
    params_.se_w2 = Matrix(c, r, 0.0);
  }
}

int SurveyNet::head_index(const std::string& name) const {
  for (std::size_t i = 0; i < cfg_.heads.size(); ++i)
    if (cfg_.heads[i].name == name) return static_cast<int>(i);
  return -1;
}

int SurveyNet::head_index_for_kind(const std::string& kind) const {
  for (std::size_t i = 0; i < cfg_.heads.size(); ++i)
    if (cfg_.heads[i].kind == kind) return static_cast<int>(i);
  return -1;
}

void SurveyNet::assemble_input(const FeatureVector& fv, Vec& input,
                               Vec& lhuc_input) const {
  if (fv.raw.size() != static_cast<std::size_t>(layout_.dim))
    throw nn::ConfigError("feature vector raw dim " +
                          std::to_string(fv.raw.size()) +
                          " != layout dim " + std::to_string(layout_.dim));
  const auto ed = static_cast<std::size_t>(cfg_.embedding_dim);
  input.assign(3 * ed + fv.raw.size(), 0.0);
  lookup_into(params_.user_emb, fv.user_id, {input.data(), ed});
  lookup_into(params_.item_emb, fv.item_id, {input.data() + ed, ed});
  lookup_into(params_.author_emb, fv.author_id, {input.data() + 2 * ed, ed});
  std::copy(fv.raw.begin(), fv.raw.end(), input.begin() + 3 * ed);

  if (!cfg_.use_lhuc) {
    lhuc_input.clear();
    return;
  }
  lhuc_input.assign(3 * ed + static_cast<std::size_t>(lhuc_raw_layout_.dim),
                    0.0);
  std::copy(input.begin(), input.begin() + 3 * ed, lhuc_input.begin());
  std::size_t off = 3 * ed;
  for (const auto& slot : lhuc_raw_layout_.slots) {
    for (int i = 0; i < slot.width; ++i)
      lhuc_input[off++] = fv.raw[static_cast<std::size_t>(slot.offset + i)];
  }
}

void SurveyNet::forward(const FeatureVector& fv, ForwardTrace& trace) const {
  assemble_input(fv, trace.input, trace.lhuc_input);
  forward_assembled(trace);
}

void SurveyNet::forward_assembled(ForwardTrace& trace) const {
  const std::size_t n_layers = params_.backbone.layers.size();
  trace.backbone.resize(n_layers);
  trace.gated.resize(n_layers);
  trace.lhuc.resize(cfg_.use_lhuc ? n_layers : 0);

  std::span<const double> cur = trace.input;
  std::span<const double> lhuc_cur = trace.lhuc_input;
  for (std::size_t l = 0; l < n_layers; ++l) {
    nn::layer_forward(params_.backbone.layers[l], cur, trace.backbone[l]);
    if (cfg_.use_lhuc) {
      nn::layer_forward(params_.lhuc.layers[l], lhuc_cur, trace.lhuc[l]);
      lhuc_cur = trace.lhuc[l].post;
      trace.gated[l].resize(trace.backbone[l].post.size());
      for (std::size_t i = 0; i < trace.gated[l].size(); ++i)
        trace.gated[l][i] = trace.backbone[l].post[i] * trace.lhuc[l].post[i];
    } else {
      trace.gated[l] = trace.backbone[l].post;
    }
    cur = trace.gated[l];
  }

  const Vec& backbone_out = trace.gated.back();
  if (cfg_.use_se) {
    // squeeze is the identity here: each channel has spatial size 1
    nn::DenseLayer w1{params_.se_w1, Vec(params_.se_w1.rows, 0.0),
                      nn::Activation::relu};
    nn::layer_forward(w1, backbone_out, trace.se_hidden);
    Vec z2;
    matvec(params_.se_w2, trace.se_hidden.post, z2);
    trace.se_excite.resize(z2.size());
    for (std::size_t i = 0; i < z2.size(); ++i)
      trace.se_excite[i] = nn::activate(nn::Activation::sigmoid, z2[i]);
    trace.representation.resize(backbone_out.size());
    for (std::size_t i = 0; i < backbone_out.size(); ++i)
      trace.representation[i] = trace.se_excite[i] * backbone_out[i];
  } else {
    trace.representation = backbone_out;
  }

  trace.heads.resize(cfg_.heads.size());
  trace.head_probs.resize(cfg_.heads.size());
  for (std::size_t h = 0; h < cfg_.heads.size(); ++h) {
    const auto& stack = params_.heads[h];
    trace.heads[h].resize(stack.layers.size());
    std::span<const double> hin = trace.representation;
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
      nn::layer_forward(stack.layers[l], hin, trace.heads[h][l]);
      hin = trace.heads[h][l].post;
    }
    trace.head_probs[h] = trace.heads[h].back().post[0];
  }
}

Vec SurveyNet::predict(const FeatureVector& fv) const {
  ForwardTrace trace;
  forward(fv, trace);
  return trace.head_probs;
}

void SurveyNet::backward(const FeatureVector& fv, const ForwardTrace& trace,
                         std::span<const double> d_logit,
                         SurveyNetParams& grads) const {
  const std::size_t n_layers = params_.backbone.layers.size();
  Vec d_repr(trace.representation.size(), 0.0);

  // heads: the final layer's pre-activation gradient is supplied directly
  // (w*(p-y)/W for BCE through the sigmoid), which avoids the p*(1-p)
  // cancellation blowing up near saturated outputs
  Vec d_in, d_out;
  for (std::size_t h = 0; h < cfg_.heads.size(); ++h) {
    if (d_logit[h] == 0.0) continue;
    const auto& stack = params_.heads[h];
    auto& gstack = grads.heads[h];
    const std::size_t last = stack.layers.size() - 1;
    std::span<const double> last_in =
        last == 0 ? std::span<const double>(trace.representation)
                  : std::span<const double>(trace.heads[h][last - 1].post);
    Vec d_pre{d_logit[h]};
    outer_add(gstack.layers[last].weights, d_pre, last_in);
    gstack.layers[last].bias[0] += d_pre[0];
    d_out.assign(stack.layers[last].in_dim(), 0.0);
    matvec_transpose_add(stack.layers[last].weights, d_pre, d_out);
    for (std::size_t l = last; l-- > 0;) {
      std::span<const double> lin =
          l == 0 ? std::span<const double>(trace.representation)
                 : std::span<const double>(trace.heads[h][l - 1].post);
      nn::layer_backward(stack.layers[l], lin, trace.heads[h][l], d_out,
                         gstack.layers[l].weights, gstack.layers[l].bias,
                         d_in);
      d_out = d_in;
    }
    for (std::size_t i = 0; i < d_repr.size(); ++i) d_repr[i] += d_out[i];
  }

  // SE rescaling
  const Vec& backbone_out = trace.gated.back();
  Vec d_backbone_out(backbone_out.size(), 0.0);
  if (cfg_.use_se) {
    Vec d_z2(trace.se_excite.size());
    for (std::size_t i = 0; i < trace.se_excite.size(); ++i) {
      const double e = trace.se_excite[i];
      d_backbone_out[i] = d_repr[i] * e;
      d_z2[i] = d_repr[i] * backbone_out[i] * e * (1.0 - e);
    }
    outer_add(grads.se_w2, d_z2, trace.se_hidden.post);
    Vec d_u(params_.se_w2.cols, 0.0);
    matvec_transpose_add(params_.se_w2, d_z2, d_u);
    Vec d_z1(d_u.size());
    for (std::size_t i = 0; i < d_u.size(); ++i)
      d_z1[i] = trace.se_hidden.post[i] > 0.0 ? d_u[i] : 0.0;
    outer_add(grads.se_w1, d_z1, backbone_out);
    Vec d_s(params_.se_w1.cols, 0.0);
    matvec_transpose_add(params_.se_w1, d_z1, d_s);
    for (std::size_t i = 0; i < d_backbone_out.size(); ++i)
      d_backbone_out[i] += d_s[i];
  } else {
    d_backbone_out = d_repr;
  }

  // backbone with interleaved gate chain, top down; the gate at level l
  // receives gradient both from the channel-wise product and from feeding
  // LHUC layer l+1
  Vec d_gated = d_backbone_out;
  Vec pending_chain;  // dL/d(gate_l) contributed by LHUC layer l+1
  Vec d_lhuc_input;
  for (std::size_t l = n_layers; l-- > 0;) {
    Vec d_post(trace.backbone[l].post.size());
    if (cfg_.use_lhuc) {
      Vec d_gate(trace.lhuc[l].post.size());
      for (std::size_t i = 0; i < d_post.size(); ++i) {
        d_post[i] = d_gated[i] * trace.lhuc[l].post[i];
        d_gate[i] = d_gated[i] * trace.backbone[l].post[i];
      }
      if (!pending_chain.empty())
        for (std::size_t i = 0; i < d_gate.size(); ++i)
          d_gate[i] += pending_chain[i];
      std::span<const double> lhuc_in =
          l == 0 ? std::span<const double>(trace.lhuc_input)
                 : std::span<const double>(trace.lhuc[l - 1].post);
      Vec d_lhuc_in;
      nn::layer_backward(params_.lhuc.layers[l], lhuc_in, trace.lhuc[l],
                         d_gate, grads.lhuc.layers[l].weights,
                         grads.lhuc.layers[l].bias, d_lhuc_in);
      if (l == 0)
        d_lhuc_input = std::move(d_lhuc_in);
      else
        pending_chain = std::move(d_lhuc_in);
    } else {
      d_post = d_gated;
    }
    std::span<const double> lin =
        l == 0 ? std::span<const double>(trace.input)
               : std::span<const double>(trace.gated[l - 1]);
    Vec d_layer_in;
    nn::layer_backward(params_.backbone.layers[l], lin, trace.backbone[l],
                       d_post, grads.backbone.layers[l].weights,
                       grads.backbone.layers[l].bias, d_layer_in);
    d_gated = std::move(d_layer_in);
  }

  scatter_input_grad(fv, d_gated, d_lhuc_input, grads);
}

void SurveyNet::scatter_input_grad(const FeatureVector& fv,
                                   std::span<const double> d_input,
                                   std::span<const double> d_lhuc_input,
                                   SurveyNetParams& grads) const {
  const auto ed = static_cast<std::size_t>(cfg_.embedding_dim);
  if (ed == 0) return;
  scatter_into(grads.user_emb, params_.user_emb, fv.user_id,
               d_input.subspan(0, ed));
  scatter_into(grads.item_emb, params_.item_emb, fv.item_id,
               d_input.subspan(ed, ed));
  scatter_into(grads.author_emb, params_.author_emb, fv.author_id,
               d_input.subspan(2 * ed, ed));
  if (!d_lhuc_input.empty()) {
    scatter_into(grads.user_emb, params_.user_emb, fv.user_id,
                 d_lhuc_input.subspan(0, ed));
    scatter_into(grads.item_emb, params_.item_emb, fv.item_id,
                 d_lhuc_input.subspan(ed, ed));
    scatter_into(grads.author_emb, params_.author_emb, fv.author_id,
                 d_lhuc_input.subspan(2 * ed, ed));
  }
}

void SurveyNet::for_each_tensor(
    SurveyNetParams& p,
    const std::function<void(const std::string&, std::span<double>)>& fn) {
  fn("user_emb", p.user_emb.data);
  fn("item_emb", p.item_emb.data);
  fn("author_emb", p.author_emb.data);
  for (std::size_t l = 0; l < p.backbone.layers.size(); ++l) {
    fn("backbone." + std::to_string(l) + ".w",
       p.backbone.layers[l].weights.data);
    fn("backbone." + std::to_string(l) + ".b", p.backbone.layers[l].bias);
  }
  for (std::size_t l = 0; l < p.lhuc.layers.size(); ++l) {
    fn("lhuc." + std::to_string(l) + ".w", p.lhuc.layers[l].weights.data);
    fn("lhuc." + std::to_string(l) + ".b", p.lhuc.layers[l].bias);
  }
  fn("se_w1", p.se_w1.data);
  fn("se_w2", p.se_w2.data);
  for (std::size_t h = 0; h < p.heads.size(); ++h) {
    for (std::size_t l = 0; l < p.heads[h].layers.size(); ++l) {
      fn("head." + std::to_string(h) + "." + std::to_string(l) + ".w",
         p.heads[h].layers[l].weights.data);
      fn("head." + std::to_string(h) + "." + std::to_string(l) + ".b",
         p.heads[h].layers[l].bias);
    }
  }
}

std::size_t SurveyNet::total_params(const SurveyNetParams& p) {
  std::size_t n = 0;
  for_each_tensor(const_cast<SurveyNetParams&>(p),
                  [&](const std::string&, std::span<double> t) {
                    n += t.size();
                  });
  return n;
}

SurveyNetParams SurveyNet::zeros_like() const {
  SurveyNetParams z = params_;
  for_each_tensor(z, [](const std::string&, std::span<double> t) {
    std::fill(t.begin(), t.end(), 0.0);
  });
  return z;
}

double SurveyNet::batch_loss_and_grads(std::span<const WeightedExample> batch,
                                       SurveyNetParams* grads) {
  double weight_total = 0.0;
  for (const auto& ex : batch) {
    if (ex.labels.size() != cfg_.heads.size())
      throw nn::TrainingError("example label count mismatch");
    for (std::int8_t lab : ex.labels)
      if (lab != kLabelNA) weight_total += ex.sample_weight;
  }
  if (weight_total <= 0.0)
    throw nn::TrainingError("batch has no applicable labels");

  double loss = 0.0;
  ForwardTrace trace;
  Vec d_logit(cfg_.heads.size());
  for (const auto& ex : batch) {
    forward(ex.features, trace);
    bool any = false;
    for (std::size_t h = 0; h < cfg_.heads.size(); ++h) {
      if (ex.labels[h] == kLabelNA) {
        d_logit[h] = 0.0;
        continue;
      }
      any = true;
      const double p = nn::clamp_prob(trace.head_probs[h]);
      const double y = static_cast<double>(ex.labels[h]);
      loss += ex.sample_weight *
              (-y * std::log(p) - (1.0 - y) * std::log(1.0 - p)) /
              weight_total;
      d_logit[h] =
          ex.sample_weight * (trace.head_probs[h] - y) / weight_total;
    }
    if (!any) throw nn::TrainingError("example with no applicable label");
    if (grads) backward(ex.features, trace, d_logit, *grads);
  }
  return loss;
}

double dataset_loss(SurveyNet& net, std::span<const WeightedExample> batch) {
  return net.batch_loss_and_grads(batch, nullptr);
}

TrainReport SurveyNet::train(const std::vector<WeightedExample>& dataset,
                             const TrainConfig& tc) {
  if (dataset.empty()) throw nn::TrainingError("empty training dataset");
  if (tc.batch_size < 1) throw nn::ConfigError("batch_size must be >= 1");
  for (const auto& ex : dataset) {
    if (!(ex.sample_weight > 0.0) || !std::isfinite(ex.sample_weight))
      throw nn::TrainingError("sample_weight must be positive and finite");
  }

  SurveyNetParams grads = zeros_like();
  std::vector<std::span<double>> param_view, grad_view_mut;
  for_each_tensor(params_, [&](const std::string&, std::span<double> t) {
    param_view.push_back(t);
  });
  std::vector<std::string> tensor_names;
  for_each_tensor(grads, [&](const std::string& name, std::span<double> t) {
    grad_view_mut.push_back(t);
    tensor_names.push_back(name);
  });
  std::vector<std::span<const double>> grad_view(grad_view_mut.begin(),
                                                 grad_view_mut.end());

  nn::Optimizer opt(tc.optimizer);
  TrainReport report;
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<WeightedExample> batch;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    Rng shuffle_rng(stream_seed(tc.shuffle_seed, 0x0e90c4u,
                                static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    long batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(tc.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i)
        batch.push_back(dataset[order[i]]);
      for (auto& g : grad_view_mut) std::fill(g.begin(), g.end(), 0.0);
      const double loss = batch_loss_and_grads(batch, &grads);
      if (!std::isfinite(loss))
        throw nn::TrainingError("non-finite loss at step " +
                                std::to_string(report.steps));
      for (std::size_t t = 0; t < grad_view_mut.size(); ++t) {
        for (double g : grad_view_mut[t]) {
          if (!std::isfinite(g))
            throw nn::TrainingError("non-finite gradient in tensor " +
                                    tensor_names[t]);
        }
      }
      opt.step(param_view, grad_view);
      epoch_loss += loss;
      ++batches;
      ++report.steps;
      report.final_loss = loss;
    }
    report.epoch_loss.push_back(batches ? epoch_loss / batches : 0.0);
  }
  return report;
}

GradCheckResult SurveyNet::grad_check(std::span<const WeightedExample> batch,
                                      double h, std::size_t n_coords,
                                      std::uint64_t seed) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: h must be > 0");
  SurveyNetParams grads = zeros_like();
  batch_loss_and_grads(batch, &grads);

  struct TensorRef {
    std::string name;
    std::span<double> params;
    std::span<double> grads;
  };
  std::vector<TensorRef> tensors;
  {
    std::vector<std::pair<std::string, std::span<double>>> ps, gs;
    for_each_tensor(params_, [&](const std::string& n, std::span<double> t) {
      ps.emplace_back(n, t);
    });
    for_each_tensor(grads, [&](const std::string& n, std::span<double> t) {
      gs.emplace_back(n, t);
    });
    for (std::size_t i = 0; i < ps.size(); ++i)
      tensors.push_back({ps[i].first, ps[i].second, gs[i].second});
  }

  // Candidates: every dense coordinate, plus embedding coordinates the
  // batch actually touched (untouched rows are exactly zero on both sides).
  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    const bool is_emb = tensors[t].name.find("emb") != std::string::npos;
    for (std::size_t i = 0; i < tensors[t].params.size(); ++i) {
      if (is_emb && tensors[t].grads[i] == 0.0) continue;
      candidates.emplace_back(t, i);
    }
  }
  Rng rng(stream_seed(seed, 0x96adc4ecu));
  rng.shuffle(candidates);
  if (candidates.size() > n_coords) candidates.resize(n_coords);

  GradCheckResult result;
  result.checked = candidates.size();
  for (const auto& [t, i] : candidates) {
    double& theta = tensors[t].params[i];
    const double saved = theta;
    theta = saved + h;
    const double lp = batch_loss_and_grads(batch, nullptr);
    theta = saved - h;
    const double lm = batch_loss_and_grads(batch, nullptr);
    theta = saved;
    const double numeric = (lp - lm) / (2.0 * h);
    const double analytic = tensors[t].grads[i];
    const double denom =
        std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    const double rel = std::abs(analytic - numeric) / denom;
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_tensor = tensors[t].name;
    }
  }
  return result;
}

std::vector<FeatureImportance> SurveyNet::feature_importance(
    const std::vector<WeightedExample>& eval_set,
    std::span<const std::string> feature_names) const {
  struct Mask {
    int emb_block = -1;  // 0 user, 1 item, 2 author
    int raw_offset = -1;
    int raw_width = 0;
  };

  auto mean_auc = [&](const Mask* mask) {
    const auto ed = static_cast<std::size_t>(cfg_.embedding_dim);
    std::vector<std::vector<double>> ps(cfg_.heads.size());
    std::vector<std::vector<int>> ys(cfg_.heads.size());
    for (const auto& ex : eval_set) {
      FeatureVector fv = ex.features;
      if (mask && mask->raw_offset >= 0) {
        for (int i = 0; i < mask->raw_width; ++i)
          fv.raw[static_cast<std::size_t>(mask->raw_offset + i)] = 0.0;
      }
      ForwardTrace trace;
      forward(fv, trace);
      if (mask && mask->emb_block >= 0 && ed > 0) {
        // zero the embedding block in the assembled input and rerun
        ForwardTrace t2;
        t2.input = trace.input;
        t2.lhuc_input = trace.lhuc_input;
        std::fill(t2.input.begin() + mask->emb_block * ed,
                  t2.input.begin() + (mask->emb_block + 1) * ed, 0.0);
        if (!t2.lhuc_input.empty())
          std::fill(t2.lhuc_input.begin() + mask->emb_block * ed,
                    t2.lhuc_input.begin() + (mask->emb_block + 1) * ed, 0.0);
        forward_assembled(t2);
        trace.head_probs = t2.head_probs;
      }
      for (std::size_t hh = 0; hh < cfg_.heads.size(); ++hh) {
        if (ex.labels[hh] == kLabelNA) continue;
        ps[hh].push_back(trace.head_probs[hh]);
        ys[hh].push_back(ex.labels[hh]);
      }
    }
    double total = 0.0;
    int heads = 0;
    for (std::size_t hh = 0; hh < cfg_.heads.size(); ++hh) {
      try {
        total += metrics::auc_pairs(ps[hh], ys[hh]);
        ++heads;
      } catch (const metrics::MetricError&) {
      }
    }
    if (heads == 0)
      throw metrics::MetricError("feature_importance: no evaluable head");
    return total / heads;
  };

  const double full = mean_auc(nullptr);
  std::vector<FeatureImportance> out;
  for (const auto& name : feature_names) {
    Mask mask;
    if (name == "user_id")
      mask.emb_block = 0;
    else if (name == "item_id")
      mask.emb_block = 1;
    else if (name == "author_id")
      mask.emb_block = 2;
    else {
      const auto& slot = layout_.slot(name);  // throws if unknown
      mask.raw_offset = slot.offset;
      mask.raw_width = slot.width;
    }
    out.push_back({name, full - mean_auc(&mask)});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const FeatureImportance& a, const FeatureImportance& b) {
                     return a.auc_drop > b.auc_drop;
                   });
  return out;
}

}  // namespace usm
