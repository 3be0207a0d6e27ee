#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "usm/matrix.hpp"
#include "usm/rng.hpp"

namespace usm::nn {

// Raised when layer/feature dimensions are inconsistent with the config.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when training goes numerically bad (non-finite loss or gradient).
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// two_sigmoid is 2*sigmoid(x): used for gate layers so that zero-initialized
// gates scale by exactly 1.
enum class Activation : std::uint8_t { identity, relu, sigmoid, two_sigmoid };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

double activate(Activation a, double z);
// derivative expressed through the post-activation value y = f(z)
double activate_grad(Activation a, double y);

struct DenseLayer {
  Matrix weights;  // out_dim x in_dim
  Vec bias;        // out_dim
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return weights.cols; }
  std::size_t out_dim() const { return weights.rows; }
};

struct MlpStack {
  std::vector<DenseLayer> layers;

  std::size_t in_dim() const {
    return layers.empty() ? 0 : layers.front().in_dim();
  }
  std::size_t out_dim() const {
    return layers.empty() ? 0 : layers.back().out_dim();
  }
  // throws ConfigError if consecutive layer dims disagree
  void validate() const;
};

// Glorot-uniform weights, zero bias.
void init_layer(DenseLayer& layer, Rng& rng);
void zero_layer(DenseLayer& layer);

MlpStack make_stack(std::size_t in_dim, std::span<const int> out_dims,
                    Activation hidden, Activation final_act, Rng& rng,
                    bool zero_init = false);

// Forward pass returning every layer's post-activation output; the last
// entry is the stack output.
std::vector<Vec> forward(const MlpStack& stack, std::span<const double> input);

// pre/post activations captured during a recorded forward pass
struct LayerTrace {
  Vec pre;
  Vec post;
};

void layer_forward(const DenseLayer& layer, std::span<const double> input,
                   LayerTrace& trace);

// Backprop one layer. d_post is dL/d(post-activation output). Parameter
// gradients are accumulated into dw/db; returns dL/d(input) in d_input.
void layer_backward(const DenseLayer& layer, std::span<const double> input,
                    const LayerTrace& trace, std::span<const double> d_post,
                    Matrix& dw, Vec& db, Vec& d_input);

// Predictions exactly 0 or 1 are clamped to [1e-7, 1-1e-7] before the log.
constexpr double kProbClamp = 1e-7;
double clamp_prob(double p);

// sum_i w_i * [-y_i log p_i - (1-y_i) log(1-p_i)] / sum_i w_i
double weighted_bce_loss(std::span<const double> predictions,
                         std::span<const double> labels,
                         std::span<const double> weights);

enum class OptimizerKind : std::uint8_t { sgd, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Single-step updates on a flat parameter view.
void sgd_update(std::span<double> params, std::span<const double> grads,
                double learning_rate);
void adam_update(std::span<double> params, std::span<const double> grads,
                 std::span<double> m, std::span<double> v, long step,
                 const OptimizerConfig& cfg);

// Stateful optimizer over one flat parameter vector. Moment tensors match
// the parameter count exactly.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

  void step(std::span<double> params, std::span<const double> grads);

  // One update across a model's tensor list; moments are laid out flat in
  // the concatenation order, so the list must be stable across steps.
  void step(const std::vector<std::span<double>>& params,
            const std::vector<std::span<const double>>& grads);

  long step_count() const { return step_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  Vec m_, v_;
  long step_ = 0;
};

}  // namespace usm::nn
