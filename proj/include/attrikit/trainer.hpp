#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "attrikit/graph.hpp"
#include "attrikit/kernels.hpp"
#include "attrikit/rng.hpp"
#include "attrikit/synthetic.hpp"

namespace attrikit {

// --- Adam ---

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
struct AdamState {
  Tensor<Scalar> m;
  Tensor<Scalar> v;
  std::size_t t = 0;
};

/// One bias-corrected Adam update, in place.
template <typename Scalar>
void adam_step(Tensor<Scalar>& params, const Tensor<Scalar>& grads, AdamState<Scalar>& state,
               const AdamConfig& config) {
  require_same_shape(params, grads, "adam_step");
  if (!grads.all_finite()) raise(ErrorKind::non_finite, "adam_step: non-finite gradient");
  if (state.t == 0) {
    state.m = Tensor<Scalar>::zeros(params.shape());
    state.v = Tensor<Scalar>::zeros(params.shape());
  }
  state.t += 1;
  const Scalar b1 = static_cast<Scalar>(config.beta1);
  const Scalar b2 = static_cast<Scalar>(config.beta2);
  const Scalar correction1 = Scalar(1) - static_cast<Scalar>(std::pow(config.beta1, state.t));
  const Scalar correction2 = Scalar(1) - static_cast<Scalar>(std::pow(config.beta2, state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (Scalar(1) - b1) * grads[i];
    state.v[i] = b2 * state.v[i] + (Scalar(1) - b2) * grads[i] * grads[i];
    const Scalar m_hat = state.m[i] / correction1;
    const Scalar v_hat = state.v[i] / correction2;
    params[i] -= static_cast<Scalar>(config.learning_rate) * m_hat /
                 (std::sqrt(v_hat) + static_cast<Scalar>(config.eps));
  }
}

// --- loss ---

/// Stable softmax cross-entropy from prelogits; optional gradient output.
template <typename Scalar>
Scalar cross_entropy(const Tensor<Scalar>& prelogits, std::size_t label,
                     Tensor<Scalar>* grad = nullptr) {
  if (label >= prelogits.size())
    raise(ErrorKind::invalid_target,
          "label " + std::to_string(label) + " out of range for " +
              std::to_string(prelogits.size()) + " classes");
  const Scalar m = max_value(prelogits);
  Scalar sum_exp = 0;
  for (std::size_t i = 0; i < prelogits.size(); ++i) sum_exp += std::exp(prelogits[i] - m);
  const Scalar log_sum = m + std::log(sum_exp);
  if (grad) {
    *grad = Tensor<Scalar>::zeros(prelogits.shape());
    for (std::size_t i = 0; i < prelogits.size(); ++i)
      (*grad)[i] = std::exp(prelogits[i] - log_sum);
    (*grad)[label] -= Scalar(1);
  }
  return log_sum - prelogits[label];
}

// --- weight initialization ---

/// Fan-in-scaled uniform init for conv/dense; batchnorm starts as identity
/// (gamma 1, beta 0, running stats 0/1).
template <typename Scalar>
void init_weights(ModelGraph<Scalar>& model, Rng& rng) {
  for (auto& node : model.nodes) {
    switch (node.op) {
      case OpKind::conv2d: {
        auto& kernel = node.weights.at("kernel");
        const double fan_in = static_cast<double>(kernel.extent(1) * kernel.extent(2) *
                                                  kernel.extent(3));
        const double bound = std::sqrt(6.0 / fan_in);
        for (std::size_t i = 0; i < kernel.size(); ++i)
          kernel[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
        node.weights.at("bias") = Tensor<Scalar>::zeros({kernel.extent(0)});
        break;
      }
      case OpKind::dense: {
        auto& weight = node.weights.at("weight");
        const double bound = std::sqrt(6.0 / static_cast<double>(weight.extent(1)));
        for (std::size_t i = 0; i < weight.size(); ++i)
          weight[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
        node.weights.at("bias") = Tensor<Scalar>::zeros({weight.extent(0)});
        break;
      }
      case OpKind::batchnorm: {
        const std::size_t c = node.weights.at("gamma").extent(0);
        node.weights.at("gamma") = Tensor<Scalar>::full({c}, Scalar(1));
        node.weights.at("beta") = Tensor<Scalar>::zeros({c});
        node.weights.at("running_mean") = Tensor<Scalar>::zeros({c});
        node.weights.at("running_var") = Tensor<Scalar>::full({c}, Scalar(1));
        break;
      }
      default:
        break;
    }
  }
}

// --- batched training-mode forward/backward ---

namespace detail {

template <typename Scalar>
struct TrainingTrace {
  std::map<std::string, std::vector<Tensor<Scalar>>> outputs;
  std::map<std::string, std::vector<std::vector<std::size_t>>> pool_argmax;
  std::map<std::string, std::vector<Tensor<Scalar>>> relu_masks;
  struct BnCache {
    Tensor<Scalar> inv_std;               // [C]
    std::vector<Tensor<Scalar>> x_hat;    // per sample
  };
  std::map<std::string, BnCache> bn;
};

/// Forward over a batch with batch-statistic batchnorm.  Optionally folds the
/// batch statistics into the stored running statistics.
template <typename Scalar>
void forward_training(ModelGraph<Scalar>& model, const std::vector<Tensor<Scalar>>& images,
                      TrainingTrace<Scalar>& trace, bool update_running, double momentum) {
  const std::size_t batch = images.size();
  const auto batch_of = [&](const std::string& id) -> const std::vector<Tensor<Scalar>>& {
    return trace.outputs.at(id);
  };
  const auto value_of = [&](const std::string& id, std::size_t s) -> const Tensor<Scalar>& {
    if (id == kInputId) return images[s];
    return trace.outputs.at(id)[s];
  };

  for (auto& node : model.nodes) {
    std::vector<Tensor<Scalar>> outs(batch);
    switch (node.op) {
      case OpKind::conv2d:
        for (std::size_t s = 0; s < batch; ++s)
          outs[s] = conv2d_forward(value_of(node.inputs[0], s), node.weight("kernel"),
                                   node.weight("bias"), node.stride, node.padding);
        break;
      case OpKind::dense:
        for (std::size_t s = 0; s < batch; ++s) {
          const Tensor<Scalar>& in = value_of(node.inputs[0], s);
          outs[s] = dense_forward(in.reshaped({in.size()}), node.weight("weight"),
                                  node.weight("bias"));
        }
        break;
      case OpKind::relu: {
        auto& masks = trace.relu_masks[node.id];
        masks.resize(batch);
        for (std::size_t s = 0; s < batch; ++s) {
          const Tensor<Scalar>& in = value_of(node.inputs[0], s);
          outs[s] = relu_forward(in);
          masks[s] = relu_mask(in);
        }
        break;
      }
      case OpKind::maxpool: {
        auto& argmax = trace.pool_argmax[node.id];
        argmax.resize(batch);
        for (std::size_t s = 0; s < batch; ++s) {
          auto pooled = pool_forward(value_of(node.inputs[0], s), PoolKind::max, node.window,
                                     node.stride);
          outs[s] = std::move(pooled.output);
          argmax[s] = std::move(pooled.argmax);
        }
        break;
      }
      case OpKind::avgpool:
        for (std::size_t s = 0; s < batch; ++s)
          outs[s] = pool_forward(value_of(node.inputs[0], s), PoolKind::average, node.window,
                                 node.stride)
                        .output;
        break;
      case OpKind::globalavgpool:
        for (std::size_t s = 0; s < batch; ++s)
          outs[s] = global_avgpool_forward(value_of(node.inputs[0], s));
        break;
      case OpKind::concat:
        for (std::size_t s = 0; s < batch; ++s) {
          std::vector<Tensor<Scalar>> parts;
          for (const auto& src : node.inputs) parts.push_back(value_of(src, s));
          outs[s] = concat_leading(parts);
        }
        break;
      case OpKind::softmax:
        for (std::size_t s = 0; s < batch; ++s)
          outs[s] = softmax_forward(value_of(node.inputs[0], s));
        break;
      case OpKind::batchnorm: {
        const auto& ins = node.inputs[0] == kInputId ? images : batch_of(node.inputs[0]);
        const std::size_t channels = ins[0].extent(0);
        const std::size_t per_channel = ins[0].size() / channels;
        const Scalar count = static_cast<Scalar>(batch * per_channel);
        const Scalar eps = node.weight("epsilon")[0];
        const auto& gamma = node.weight("gamma");
        const auto& beta = node.weight("beta");

        Tensor<Scalar> mean = Tensor<Scalar>::zeros({channels});
        Tensor<Scalar> var = Tensor<Scalar>::zeros({channels});
        for (std::size_t c = 0; c < channels; ++c) {
          Scalar acc = 0;
          for (std::size_t s = 0; s < batch; ++s)
            for (std::size_t i = 0; i < per_channel; ++i) acc += ins[s][c * per_channel + i];
          mean[c] = acc / count;
          Scalar acc2 = 0;
          for (std::size_t s = 0; s < batch; ++s)
            for (std::size_t i = 0; i < per_channel; ++i) {
              const Scalar d = ins[s][c * per_channel + i] - mean[c];
              acc2 += d * d;
            }
          var[c] = acc2 / count;
        }
        auto& cache = trace.bn[node.id];
        cache.inv_std = Tensor<Scalar>::zeros({channels});
        for (std::size_t c = 0; c < channels; ++c)
          cache.inv_std[c] = Scalar(1) / std::sqrt(var[c] + eps);
        cache.x_hat.resize(batch);
        for (std::size_t s = 0; s < batch; ++s) {
          cache.x_hat[s] = Tensor<Scalar>::zeros(ins[s].shape());
          outs[s] = Tensor<Scalar>::zeros(ins[s].shape());
          for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t i = 0; i < per_channel; ++i) {
              const std::size_t idx = c * per_channel + i;
              const Scalar xh = (ins[s][idx] - mean[c]) * cache.inv_std[c];
              cache.x_hat[s][idx] = xh;
              outs[s][idx] = gamma[c] * xh + beta[c];
            }
        }
        if (update_running) {
          auto& rm = node.weights.at("running_mean");
          auto& rv = node.weights.at("running_var");
          const Scalar mom = static_cast<Scalar>(momentum);
          for (std::size_t c = 0; c < channels; ++c) {
            rm[c] = mom * rm[c] + (Scalar(1) - mom) * mean[c];
            rv[c] = mom * rv[c] + (Scalar(1) - mom) * var[c];
          }
        }
        break;
      }
    }
    trace.outputs[node.id] = std::move(outs);
  }
}

}  // namespace detail

/// Per-slot weight gradients plus batch loss/accuracy, from one training-mode
/// pass (batch-statistic batchnorm included).
template <typename Scalar>
struct BatchGradients {
  Scalar loss = 0;
  double accuracy = 0.0;
  std::map<std::string, std::map<std::string, Tensor<Scalar>>> weight_grads;
};

/// Slots updated by the optimizer (running statistics and epsilon are not).
inline std::vector<std::string> trainable_slots(OpKind op) {
  switch (op) {
    case OpKind::conv2d: return {"kernel", "bias"};
    case OpKind::dense: return {"weight", "bias"};
    case OpKind::batchnorm: return {"gamma", "beta"};
    default: return {};
  }
}

template <typename Scalar>
BatchGradients<Scalar> batch_gradients(ModelGraph<Scalar>& model,
                                       const std::vector<Tensor<Scalar>>& images,
                                       const std::vector<std::size_t>& labels, bool update_running,
                                       double bn_momentum) {
  if (images.empty() || images.size() != labels.size())
    raise(ErrorKind::invalid_argument, "batch_gradients: empty batch or label count mismatch");
  const std::size_t batch = images.size();

  detail::TrainingTrace<Scalar> trace;
  detail::forward_training(model, images, trace, update_running, bn_momentum);

  BatchGradients<Scalar> result;
  const auto value_of = [&](const std::string& id, std::size_t s) -> const Tensor<Scalar>& {
    if (id == kInputId) return images[s];
    return trace.outputs.at(id)[s];
  };

  // loss gradient at the prelogits, mean-reduced over the batch
  std::map<std::string, std::vector<Tensor<Scalar>>> grads;
  auto& seed = grads[model.prelogits_id];
  seed.resize(batch);
  Scalar loss_sum = 0;
  std::size_t correct = 0;
  for (std::size_t s = 0; s < batch; ++s) {
    const Tensor<Scalar>& prelogits = trace.outputs.at(model.prelogits_id)[s];
    Tensor<Scalar> g;
    loss_sum += cross_entropy(prelogits, labels[s], &g);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] /= static_cast<Scalar>(batch);
    seed[s] = std::move(g);
    if (argmax(prelogits) == labels[s]) ++correct;
  }
  result.loss = loss_sum / static_cast<Scalar>(batch);
  result.accuracy = static_cast<double>(correct) / static_cast<double>(batch);

  const auto deposit = [&](const std::string& id, std::size_t s, Tensor<Scalar>&& g) {
    if (id == kInputId) return;  // input gradients are not needed for training
    auto& slot = grads[id];
    if (slot.empty()) slot.resize(batch);
    if (slot[s].size() == 0)
      slot[s] = std::move(g);
    else
      accumulate(slot[s], g);
  };

  for (auto node_it = model.nodes.rbegin(); node_it != model.nodes.rend(); ++node_it) {
    const LayerNode<Scalar>& node = *node_it;
    auto grad_it = grads.find(node.id);
    if (grad_it == grads.end()) continue;
    std::vector<Tensor<Scalar>> node_grads = std::move(grad_it->second);
    grads.erase(grad_it);
    // samples the loss never touched carry zero gradient
    for (std::size_t s = 0; s < batch; ++s)
      if (node_grads[s].size() == 0)
        node_grads[s] = Tensor<Scalar>::zeros(trace.outputs.at(node.id)[s].shape());

    switch (node.op) {
      case OpKind::conv2d: {
        const auto& kernel = node.weight("kernel");
        Tensor<Scalar> k_grad = Tensor<Scalar>::zeros(kernel.shape());
        Tensor<Scalar> b_grad = Tensor<Scalar>::zeros({kernel.extent(0)});
        for (std::size_t s = 0; s < batch; ++s) {
          const Tensor<Scalar>& in = value_of(node.inputs[0], s);
          accumulate(k_grad, conv2d_weight_grad(node_grads[s], in, kernel.shape(), node.stride,
                                                node.padding));
          accumulate(b_grad, conv2d_bias_grad(node_grads[s]));
          deposit(node.inputs[0], s,
                  conv2d_input_grad(node_grads[s], kernel, in.shape(), node.stride, node.padding));
        }
        result.weight_grads[node.id]["kernel"] = std::move(k_grad);
        result.weight_grads[node.id]["bias"] = std::move(b_grad);
        break;
      }
      case OpKind::dense: {
        const auto& weight = node.weight("weight");
        Tensor<Scalar> w_grad = Tensor<Scalar>::zeros(weight.shape());
        Tensor<Scalar> b_grad = Tensor<Scalar>::zeros({weight.extent(0)});
        for (std::size_t s = 0; s < batch; ++s) {
          const Tensor<Scalar>& in = value_of(node.inputs[0], s);
          const Tensor<Scalar> flat = in.reshaped({in.size()});
          accumulate(w_grad, dense_weight_grad(node_grads[s], flat));
          accumulate(b_grad, node_grads[s]);
          Tensor<Scalar> g = dense_input_grad(node_grads[s], weight);
          deposit(node.inputs[0], s, g.reshaped(in.shape()));
        }
        result.weight_grads[node.id]["weight"] = std::move(w_grad);
        result.weight_grads[node.id]["bias"] = std::move(b_grad);
        break;
      }
      case OpKind::relu:
        for (std::size_t s = 0; s < batch; ++s)
          deposit(node.inputs[0], s, hadamard(trace.relu_masks.at(node.id)[s], node_grads[s]));
        break;
      case OpKind::maxpool:
        for (std::size_t s = 0; s < batch; ++s)
          deposit(node.inputs[0], s,
                  maxpool_backward(node_grads[s], trace.pool_argmax.at(node.id)[s],
                                   value_of(node.inputs[0], s).shape()));
        break;
      case OpKind::avgpool:
        for (std::size_t s = 0; s < batch; ++s)
          deposit(node.inputs[0], s, avgpool_backward(node_grads[s], node.window, node.stride,
                                                      value_of(node.inputs[0], s).shape()));
        break;
      case OpKind::globalavgpool:
        for (std::size_t s = 0; s < batch; ++s)
          deposit(node.inputs[0], s,
                  global_avgpool_backward(node_grads[s], value_of(node.inputs[0], s).shape()));
        break;
      case OpKind::concat:
        for (std::size_t s = 0; s < batch; ++s) {
          std::vector<std::vector<std::size_t>> part_shapes;
          for (const auto& src : node.inputs) part_shapes.push_back(value_of(src, s).shape());
          auto parts = split_leading(node_grads[s], part_shapes);
          for (std::size_t p = 0; p < parts.size(); ++p)
            deposit(node.inputs[p], s, std::move(parts[p]));
        }
        break;
      case OpKind::softmax:
        for (std::size_t s = 0; s < batch; ++s)
          deposit(node.inputs[0], s,
                  softmax_backward(node_grads[s], trace.outputs.at(node.id)[s]));
        break;
      case OpKind::batchnorm: {
        const auto& cache = trace.bn.at(node.id);
        const auto& gamma = node.weight("gamma");
        const std::size_t channels = gamma.extent(0);
        const std::size_t per_channel = node_grads[0].size() / channels;
        const Scalar count = static_cast<Scalar>(batch * per_channel);

        Tensor<Scalar> dgamma = Tensor<Scalar>::zeros({channels});
        Tensor<Scalar> dbeta = Tensor<Scalar>::zeros({channels});
        Tensor<Scalar> mean_dxhat = Tensor<Scalar>::zeros({channels});
        Tensor<Scalar> mean_dxhat_xhat = Tensor<Scalar>::zeros({channels});
        for (std::size_t c = 0; c < channels; ++c) {
          Scalar sg = 0, sb = 0, s1 = 0, s2 = 0;
          for (std::size_t s = 0; s < batch; ++s)
            for (std::size_t i = 0; i < per_channel; ++i) {
              const std::size_t idx = c * per_channel + i;
              const Scalar g = node_grads[s][idx];
              const Scalar xh = cache.x_hat[s][idx];
              sg += g * xh;
              sb += g;
              s1 += g * gamma[c];
              s2 += g * gamma[c] * xh;
            }
          dgamma[c] = sg;
          dbeta[c] = sb;
          mean_dxhat[c] = s1 / count;
          mean_dxhat_xhat[c] = s2 / count;
        }
        for (std::size_t s = 0; s < batch; ++s) {
          Tensor<Scalar> dx = Tensor<Scalar>::zeros(node_grads[s].shape());
          for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t i = 0; i < per_channel; ++i) {
              const std::size_t idx = c * per_channel + i;
              const Scalar dxhat = node_grads[s][idx] * gamma[c];
              dx[idx] = cache.inv_std[c] *
                        (dxhat - mean_dxhat[c] - cache.x_hat[s][idx] * mean_dxhat_xhat[c]);
            }
          deposit(node.inputs[0], s, std::move(dx));
        }
        result.weight_grads[node.id]["gamma"] = std::move(dgamma);
        result.weight_grads[node.id]["beta"] = std::move(dbeta);
        break;
      }
    }
  }
  return result;
}

/// Batch loss under training-mode batchnorm, without touching model state;
/// the target function for finite-difference checks of weight gradients.
template <typename Scalar>
Scalar training_batch_loss(const ModelGraph<Scalar>& model,
                           const std::vector<Tensor<Scalar>>& images,
                           const std::vector<std::size_t>& labels) {
  ModelGraph<Scalar> scratch = model;
  detail::TrainingTrace<Scalar> trace;
  detail::forward_training(scratch, images, trace, false, 0.0);
  Scalar loss_sum = 0;
  for (std::size_t s = 0; s < images.size(); ++s)
    loss_sum += cross_entropy(trace.outputs.at(model.prelogits_id)[s], labels[s]);
  return loss_sum / static_cast<Scalar>(images.size());
}

// --- training loop ---

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 200;
  double validation_fraction = 0.10;
  std::size_t early_stop_patience = 20;
  std::uint64_t seed = 0;
  AdamConfig adam;  // learning_rate below overrides adam.learning_rate
  bool resplit_each_epoch = false;
  double bn_momentum = 0.99;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0, train_accuracy = 0;
  double val_loss = 0, val_accuracy = 0;
};

template <typename Scalar>
struct TrainResult {
  ModelGraph<Scalar> model;
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
};

inline std::string history_to_text(const std::vector<EpochStats>& history) {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc\n";
  char row[160];
  for (const auto& e : history) {
    std::snprintf(row, sizeof(row), "%zu,%.6f,%.6f,%.6f,%.6f\n", e.epoch, e.train_loss,
                  e.train_accuracy, e.val_loss, e.val_accuracy);
    out += row;
  }
  return out;
}

template <typename Scalar>
TrainResult<Scalar> train(const ModelGraph<Scalar>& model_template,
                          const std::vector<Sample>& dataset, const TrainConfig& config) {
  if (dataset.empty()) raise(ErrorKind::invalid_argument, "train: dataset is empty");
  if (config.batch_size < 1) raise(ErrorKind::invalid_argument, "train: batch_size must be >= 1");
  if (!(config.validation_fraction > 0.0 && config.validation_fraction < 1.0))
    raise(ErrorKind::invalid_argument, "train: validation_fraction must be in (0,1)");
  if (config.early_stop_patience < 1)
    raise(ErrorKind::invalid_argument, "train: early_stop_patience must be >= 1");

  TrainResult<Scalar> result;
  result.model = model_template;
  Rng rng(config.seed);
  init_weights(result.model, rng);
  if (config.max_epochs == 0) return result;

  std::vector<Tensor<Scalar>> images;
  images.reserve(dataset.size());
  for (const auto& s : dataset) images.push_back(s.image.template cast<Scalar>());

  AdamConfig adam = config.adam;
  adam.learning_rate = config.learning_rate;
  std::map<std::string, std::map<std::string, AdamState<Scalar>>> opt_state;

  const std::size_t n = dataset.size();
  std::size_t val_count = static_cast<std::size_t>(
      std::lround(config.validation_fraction * static_cast<double>(n)));
  val_count = std::max<std::size_t>(1, std::min(val_count, n - 1));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> val_idx, train_idx;
  const auto split = [&]() {
    rng.shuffle(order);
    val_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(val_count));
    train_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(val_count), order.end());
  };
  split();

  // snapshot/restore weight state (running statistics included)
  using WeightState = std::vector<std::map<std::string, Tensor<Scalar>>>;
  const auto snapshot = [&]() {
    WeightState state;
    for (const auto& node : result.model.nodes) state.push_back(node.weights);
    return state;
  };
  WeightState best_state = snapshot();
  double best_val_acc = -1.0;
  std::size_t best_epoch = 0, epochs_since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    if (config.resplit_each_epoch && epoch > 1) split();
    rng.shuffle(train_idx);

    double loss_sum = 0.0, acc_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t at = 0; at < train_idx.size(); at += config.batch_size) {
      const std::size_t take = std::min(config.batch_size, train_idx.size() - at);
      std::vector<Tensor<Scalar>> batch_images;
      std::vector<std::size_t> batch_labels;
      batch_images.reserve(take);
      for (std::size_t i = 0; i < take; ++i) {
        batch_images.push_back(images[train_idx[at + i]]);
        batch_labels.push_back(dataset[train_idx[at + i]].label);
      }
      auto grads = batch_gradients(result.model, batch_images, batch_labels, true,
                                   config.bn_momentum);
      if (!std::isfinite(static_cast<double>(grads.loss)))
        raise(ErrorKind::divergence,
              "training diverged (non-finite loss) at epoch " + std::to_string(epoch));
      loss_sum += static_cast<double>(grads.loss) * static_cast<double>(take);
      acc_sum += grads.accuracy * static_cast<double>(take);
      seen += take;

      for (auto& node : result.model.nodes)
        for (const auto& slot : trainable_slots(node.op))
          adam_step(node.weights.at(slot), grads.weight_grads.at(node.id).at(slot),
                    opt_state[node.id][slot], adam);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(seen);
    stats.train_accuracy = acc_sum / static_cast<double>(seen);

    double val_loss = 0.0;
    std::size_t val_correct = 0;
    for (std::size_t idx : val_idx) {
      const auto trace = forward(result.model, images[idx]);
      const Tensor<Scalar>& prelogits = trace.output(result.model.prelogits_id);
      val_loss += static_cast<double>(cross_entropy(prelogits, dataset[idx].label));
      if (argmax(prelogits) == dataset[idx].label) ++val_correct;
    }
    stats.val_loss = val_loss / static_cast<double>(val_idx.size());
    stats.val_accuracy = static_cast<double>(val_correct) / static_cast<double>(val_idx.size());
    result.history.push_back(stats);

    if (stats.val_accuracy > best_val_acc) {
      best_val_acc = stats.val_accuracy;
      best_epoch = epoch;
      best_state = snapshot();
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= config.early_stop_patience) break;
    }
  }

  for (std::size_t i = 0; i < result.model.nodes.size(); ++i)
    result.model.nodes[i].weights = best_state[i];
  result.best_epoch = best_epoch;
  result.best_val_accuracy = best_val_acc;
  return result;
}

}  // namespace attrikit
