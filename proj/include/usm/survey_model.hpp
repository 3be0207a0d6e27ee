#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "usm/features.hpp"
#include "usm/nn.hpp"

namespace usm {

// Hashed ID embedding table, learned jointly with the rest of the model.
struct EmbeddingTable {
  std::size_t buckets = 0;
  std::size_t dim = 0;
  std::uint64_t salt = 0;
  Vec data;  // buckets x dim, row-major

  std::size_t bucket_of(std::uint64_t id) const {
    return static_cast<std::size_t>(mix64(id ^ salt)) & (buckets - 1);
  }
  std::span<double> row(std::size_t bucket) {
    return {data.data() + bucket * dim, dim};
  }
  std::span<const double> row(std::size_t bucket) const {
    return {data.data() + bucket * dim, dim};
  }
};

struct HeadSpec {
  std::string name;    // e.g. "satisfaction"
  std::string kind;    // survey kind it belongs to
  std::string option;  // answer option whose selection is the positive label
};

struct SurveyModelConfig {
  std::vector<int> backbone_dims = {512, 256, 128};
  std::vector<int> head_dims = {64, 16, 1};
  std::vector<HeadSpec> heads;
  bool use_lhuc = false;
  bool use_se = false;
  int se_reduction = 4;
  // raw fields consumed by the backbone (resolved against the schema)
  std::vector<std::string> features = {"language", "region", "device",
                                       "activity"};
  // critical raw features routed into the LHUC gate MLP, alongside the
  // ID embeddings
  std::vector<std::string> lhuc_features = {"language", "region", "device"};
  int embedding_dim = 16;
  int hash_bits = 16;  // 2^hash_bits buckets per ID table

  void validate() const;
};

// label per head: 1 positive, 0 negative, -1 not applicable
using LabelSet = std::vector<std::int8_t>;
constexpr std::int8_t kLabelNA = -1;

struct WeightedExample {
  FeatureVector features;
  LabelSet labels;
  double sample_weight = 1.0;
};

struct SurveyNetParams {
  EmbeddingTable user_emb, item_emb, author_emb;
  nn::MlpStack backbone;
  // gate chain; layer i's post-activation output is gate i, dims aligned
  // with the backbone layer outputs
  nn::MlpStack lhuc;
  Matrix se_w1;  // (C/n) x C
  Matrix se_w2;  // C x (C/n)
  std::vector<nn::MlpStack> heads;
};

// Everything recorded by one forward pass, enough for exact backprop.
struct ForwardTrace {
  Vec input;       // [user_emb | item_emb | author_emb | raw]
  Vec lhuc_input;  // [embeddings | critical raw slices]
  std::vector<nn::LayerTrace> backbone;  // pre/post per layer (pre-gate)
  std::vector<Vec> gated;                // post * gate per layer
  std::vector<nn::LayerTrace> lhuc;      // gate chain traces
  nn::LayerTrace se_hidden;              // relu(W1 s)
  Vec se_excite;                         // sigmoid(W2 u)
  Vec representation;                    // head input (post SE)
  std::vector<std::vector<nn::LayerTrace>> heads;
  Vec head_probs;
};

struct TrainConfig {
  int epochs = 3;
  int batch_size = 256;
  nn::OptimizerConfig optimizer;
  std::uint64_t shuffle_seed = 1;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  long steps = 0;
  double final_loss = 0.0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t checked = 0;
};

struct FeatureImportance {
  std::string feature;
  double auc_drop = 0.0;  // full AUC minus masked AUC
};

// Multi-head survey network: shared backbone with optional LHUC gating and
// SE rescaling, one sigmoid head per survey option.
class SurveyNet {
 public:
  SurveyNet(SurveyModelConfig config, FeatureSchema schema,
            std::uint64_t seed);

  const SurveyModelConfig& config() const { return cfg_; }
  const FeatureSchema& schema() const { return schema_; }
  const FeatureLayout& layout() const { return layout_; }
  SurveyNetParams& params() { return params_; }
  const SurveyNetParams& params() const { return params_; }

  std::size_t n_heads() const { return cfg_.heads.size(); }
  int head_index(const std::string& name) const;  // -1 if absent
  int head_index_for_kind(const std::string& kind) const;

  // per-head probabilities; safe to call concurrently on frozen params
  Vec predict(const FeatureVector& fv) const;

  void forward(const FeatureVector& fv, ForwardTrace& trace) const;

  // Accumulates dL into `grads` given dL/d(head prob pre-sigmoid) per head;
  // entries set to 0 skip that head.
  void backward(const FeatureVector& fv, const ForwardTrace& trace,
                std::span<const double> d_logit, SurveyNetParams& grads) const;

  TrainReport train(const std::vector<WeightedExample>& dataset,
                    const TrainConfig& tc);

  // Central-difference check of backward() on a coordinate subsample.
  GradCheckResult grad_check(std::span<const WeightedExample> batch, double h,
                             std::size_t n_coords, std::uint64_t seed);

  // Masks each feature in turn and reports the AUC drop, sorted descending.
  // AUC is averaged over heads that have both classes in `eval_set`.
  std::vector<FeatureImportance> feature_importance(
      const std::vector<WeightedExample>& eval_set,
      std::span<const std::string> feature_names) const;

  // canonical tensor walk (params and grads share shapes)
  static void for_each_tensor(
      SurveyNetParams& p,
      const std::function<void(const std::string&, std::span<double>)>& fn);
  static std::size_t total_params(const SurveyNetParams& p);

  SurveyNetParams zeros_like() const;

  // batch loss + gradient accumulation; returns weighted loss over the batch
  double batch_loss_and_grads(std::span<const WeightedExample> batch,
                              SurveyNetParams* grads);

 private:
  SurveyModelConfig cfg_;
  FeatureSchema schema_;
  FeatureLayout layout_;
  FeatureLayout lhuc_raw_layout_;  // slices of raw routed to LHUC
  SurveyNetParams params_;

  void assemble_input(const FeatureVector& fv, Vec& input,
                      Vec& lhuc_input) const;
  // forward from already-assembled inputs (trace.input/lhuc_input set)
  void forward_assembled(ForwardTrace& trace) const;
  void scatter_input_grad(const FeatureVector& fv,
                          std::span<const double> d_input,
                          std::span<const double> d_lhuc_input,
                          SurveyNetParams& grads) const;
};

// Per-head masked weighted BCE over a labeled batch (used by tests that
// need the loss without touching gradients).
double dataset_loss(SurveyNet& net, std::span<const WeightedExample> batch);

}  // namespace usm
