#include "usm/nn.hpp"

#include <algorithm>
#include <cmath>

namespace usm::nn {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::two_sigmoid: return "two_sigmoid";
  }
  return "?";
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "two_sigmoid") return Activation::two_sigmoid;
  throw ConfigError("unknown activation: " + name);
}

double activate(Activation a, double z) {
  switch (a) {
    case Activation::identity: return z;
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::two_sigmoid: return 2.0 / (1.0 + std::exp(-z));
  }
  return z;
}

double activate_grad(Activation a, double y) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::relu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: return y * (1.0 - y);
    // y = 2*sigmoid(z), dy/dz = 2*s*(1-s) = y*(1 - y/2)
    case Activation::two_sigmoid: return y * (1.0 - 0.5 * y);
  }
  return 1.0;
}

void MlpStack::validate() const {
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    if (layers[i].out_dim() != layers[i + 1].in_dim())
      throw ConfigError("stack layer " + std::to_string(i) + " out dim " +
                        std::to_string(layers[i].out_dim()) +
                        " != layer " + std::to_string(i + 1) + " in dim " +
                        std::to_string(layers[i + 1].in_dim()));
  }
  for (const auto& l : layers) {
    if (l.bias.size() != l.out_dim())
      throw ConfigError("layer bias size mismatch");
  }
}

void init_layer(DenseLayer& layer, Rng& rng) {
  const double fan_in = static_cast<double>(layer.in_dim());
  const double fan_out = static_cast<double>(layer.out_dim());
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& w : layer.weights.data) w = rng.uniform(-limit, limit);
  std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
}

void zero_layer(DenseLayer& layer) {
  std::fill(layer.weights.data.begin(), layer.weights.data.end(), 0.0);
  std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
}

MlpStack make_stack(std::size_t in_dim, std::span<const int> out_dims,
                    Activation hidden, Activation final_act, Rng& rng,
                    bool zero_init) {
  if (out_dims.empty()) throw ConfigError("stack needs at least one layer");
  MlpStack stack;
  std::size_t prev = in_dim;
  for (std::size_t i = 0; i < out_dims.size(); ++i) {
    if (out_dims[i] < 1) throw ConfigError("layer dim must be >= 1");
    const auto out = static_cast<std::size_t>(out_dims[i]);
    DenseLayer layer;
    layer.weights = Matrix(out, prev);
    layer.bias.assign(out, 0.0);
    layer.activation = (i + 1 == out_dims.size()) ? final_act : hidden;
    if (zero_init)
      zero_layer(layer);
    else
      init_layer(layer, rng);
    stack.layers.push_back(std::move(layer));
    prev = out;
  }
  return stack;
}

void layer_forward(const DenseLayer& layer, std::span<const double> input,
                   LayerTrace& trace) {
  if (input.size() != layer.in_dim())
    throw ConfigError("forward: input dim " + std::to_string(input.size()) +
                      " != layer in dim " + std::to_string(layer.in_dim()));
  matvec(layer.weights, input, trace.pre);
  for (std::size_t i = 0; i < trace.pre.size(); ++i)
    trace.pre[i] += layer.bias[i];
  trace.post.resize(trace.pre.size());
  for (std::size_t i = 0; i < trace.pre.size(); ++i)
    trace.post[i] = activate(layer.activation, trace.pre[i]);
}

std::vector<Vec> forward(const MlpStack& stack,
                         std::span<const double> input) {
  stack.validate();
  std::vector<Vec> outputs;
  outputs.reserve(stack.layers.size());
  LayerTrace trace;
  std::span<const double> cur = input;
  for (const auto& layer : stack.layers) {
    layer_forward(layer, cur, trace);
    outputs.push_back(trace.post);
    cur = outputs.back();
  }
  return outputs;
}

void layer_backward(const DenseLayer& layer, std::span<const double> input,
                    const LayerTrace& trace, std::span<const double> d_post,
                    Matrix& dw, Vec& db, Vec& d_input) {
  const std::size_t out = layer.out_dim();
  Vec d_pre(out);
  for (std::size_t i = 0; i < out; ++i)
    d_pre[i] = d_post[i] * activate_grad(layer.activation, trace.post[i]);
  outer_add(dw, d_pre, input);
  for (std::size_t i = 0; i < out; ++i) db[i] += d_pre[i];
  d_input.assign(layer.in_dim(), 0.0);
  matvec_transpose_add(layer.weights, d_pre, d_input);
}

double clamp_prob(double p) {
  return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

double weighted_bce_loss(std::span<const double> predictions,
                         std::span<const double> labels,
                         std::span<const double> weights) {
  if (predictions.size() != labels.size() ||
      predictions.size() != weights.size())
    throw std::invalid_argument("weighted_bce_loss: size mismatch");
  if (predictions.empty())
    throw std::invalid_argument("weighted_bce_loss: empty input");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = clamp_prob(predictions[i]);
    const double y = labels[i];
    num += weights[i] * (-y * std::log(p) - (1.0 - y) * std::log(1.0 - p));
    den += weights[i];
  }
  if (den <= 0.0)
    throw std::invalid_argument("weighted_bce_loss: non-positive weight sum");
  return num / den;
}

void sgd_update(std::span<double> params, std::span<const double> grads,
                double learning_rate) {
  for (std::size_t i = 0; i < params.size(); ++i)
    params[i] -= learning_rate * grads[i];
}

void adam_update(std::span<double> params, std::span<const double> grads,
                 std::span<double> m, std::span<double> v, long step,
                 const OptimizerConfig& cfg) {
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * grads[i];
    v[i] = b2 * v[i] + (1.0 - b2) * grads[i] * grads[i];
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

void Optimizer::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size())
    throw std::invalid_argument("optimizer: param/grad size mismatch");
  if (cfg_.kind == OptimizerKind::sgd) {
    ++step_;
    sgd_update(params, grads, cfg_.learning_rate);
    return;
  }
  if (m_.empty()) {
    m_.assign(params.size(), 0.0);
    v_.assign(params.size(), 0.0);
  }
  if (m_.size() != params.size())
    throw std::invalid_argument("optimizer: moment/param size mismatch");
  ++step_;
  adam_update(params, grads, m_, v_, step_, cfg_);
}

void Optimizer::step(const std::vector<std::span<double>>& params,
                     const std::vector<std::span<const double>>& grads) {
  if (params.size() != grads.size())
    throw std::invalid_argument("optimizer: tensor list size mismatch");
  std::size_t total = 0;
  for (const auto& p : params) total += p.size();
  if (cfg_.kind == OptimizerKind::sgd) {
    ++step_;
    for (std::size_t t = 0; t < params.size(); ++t)
      sgd_update(params[t], grads[t], cfg_.learning_rate);
    return;
  }
  if (m_.empty()) {
    m_.assign(total, 0.0);
    v_.assign(total, 0.0);
  }
  if (m_.size() != total)
    throw std::invalid_argument("optimizer: moment/param size mismatch");
  ++step_;
  std::size_t off = 0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size() != grads[t].size())
      throw std::invalid_argument("optimizer: param/grad size mismatch");
    adam_update(params[t], grads[t],
                std::span<double>(m_.data() + off, params[t].size()),
                std::span<double>(v_.data() + off, params[t].size()), step_,
                cfg_);
    off += params[t].size();
  }
}

}  // namespace usm::nn
