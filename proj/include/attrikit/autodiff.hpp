#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "attrikit/graph.hpp"
#include "attrikit/kernels.hpp"

namespace attrikit {

/// How gradients pass backward through ReLU nodes.
///  - plain:  dL/dx = mask * g                 (true derivative)
///  - guided: dL/dx = mask * max(g, 0)         (activity mask AND negative clamp)
enum class GradientMode { plain, guided };

/// Optional instrumentation for the backward pass: records, for every ReLU
/// node, the gradient that left it (after the mode's rule was applied).
template <typename Scalar>
struct BackpropProbe {
  std::map<std::string, Tensor<Scalar>> relu_outflow;
};

namespace detail {

template <typename Scalar>
Tensor<Scalar> batchnorm_input_grad(const LayerNode<Scalar>& node, const Tensor<Scalar>& grad) {
  const auto& gamma = node.weight("gamma");
  const auto& var = node.weight("running_var");
  const Scalar eps = node.weight("epsilon")[0];
  const std::size_t channels = grad.extent(0);
  const std::size_t per_channel = grad.size() / channels;
  Tensor<Scalar> out = Tensor<Scalar>::zeros(grad.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    const Scalar s = gamma[c] / std::sqrt(var[c] + eps);
    for (std::size_t i = 0; i < per_channel; ++i)
      out[c * per_channel + i] = grad[c * per_channel + i] * s;
  }
  return out;
}

}  // namespace detail

/// Gradient of prelogits[target] with respect to the model input, computed by
/// walking the recorded trace in reverse.  `probe`, when given, captures the
/// per-ReLU outflow for inspection.
template <typename Scalar>
Tensor<Scalar> input_gradient(const ModelGraph<Scalar>& model, const Tensor<Scalar>& x,
                              const ForwardTrace<Scalar>& trace, std::size_t target,
                              GradientMode mode = GradientMode::plain,
                              BackpropProbe<Scalar>* probe = nullptr) {
  const Tensor<Scalar>& prelogits = trace.output(model.prelogits_id);
  if (target >= prelogits.size())
    raise(ErrorKind::invalid_target, "gradient target " + std::to_string(target) +
                                         " out of range for " + std::to_string(prelogits.size()) +
                                         " prelogit value(s)");

  const auto value_of = [&](const std::string& id) -> const Tensor<Scalar>& {
    if (id == kInputId) return x;
    return trace.output(id);
  };

  // Gradient w.r.t. each node's output, accumulated as consumers are retired.
  std::map<std::string, Tensor<Scalar>> grads;
  Tensor<Scalar> seed = Tensor<Scalar>::zeros(prelogits.shape());
  seed[target] = Scalar(1);
  grads[model.prelogits_id] = std::move(seed);

  Tensor<Scalar> input_grad = Tensor<Scalar>::zeros(model.input_shape);
  const auto deposit = [&](const std::string& id, Tensor<Scalar>&& g) {
    if (id == kInputId) {
      accumulate(input_grad, g);
      return;
    }
    auto it = grads.find(id);
    if (it == grads.end())
      grads.emplace(id, std::move(g));
    else
      accumulate(it->second, g);
  };

  for (auto node_it = model.nodes.rbegin(); node_it != model.nodes.rend(); ++node_it) {
    const LayerNode<Scalar>& node = *node_it;
    auto grad_it = grads.find(node.id);
    if (grad_it == grads.end()) continue;  // not on any path to the target
    const Tensor<Scalar> grad = std::move(grad_it->second);
    grads.erase(grad_it);

    switch (node.op) {
      case OpKind::conv2d:
        deposit(node.inputs[0], conv2d_input_grad(grad, node.weight("kernel"),
                                                  value_of(node.inputs[0]).shape(), node.stride,
                                                  node.padding));
        break;
      case OpKind::dense: {
        const Tensor<Scalar>& in = value_of(node.inputs[0]);
        Tensor<Scalar> g = dense_input_grad(grad, node.weight("weight"));
        deposit(node.inputs[0], g.reshaped(in.shape()));
        break;
      }
      case OpKind::relu: {
        const Tensor<Scalar>& mask = trace.relu_masks.at(node.id);
        Tensor<Scalar> out = Tensor<Scalar>::zeros(grad.shape());
        if (mode == GradientMode::guided) {
          for (std::size_t i = 0; i < grad.size(); ++i)
            out[i] = mask[i] * (grad[i] > Scalar(0) ? grad[i] : Scalar(0));
        } else {
          for (std::size_t i = 0; i < grad.size(); ++i) out[i] = mask[i] * grad[i];
        }
        if (probe) probe->relu_outflow[node.id] = out;
        deposit(node.inputs[0], std::move(out));
        break;
      }
      case OpKind::batchnorm:
        deposit(node.inputs[0], detail::batchnorm_input_grad(node, grad));
        break;
      case OpKind::maxpool:
        deposit(node.inputs[0], maxpool_backward(grad, trace.pool_argmax.at(node.id),
                                                 value_of(node.inputs[0]).shape()));
        break;
      case OpKind::avgpool:
        deposit(node.inputs[0], avgpool_backward(grad, node.window, node.stride,
                                                 value_of(node.inputs[0]).shape()));
        break;
      case OpKind::globalavgpool:
        deposit(node.inputs[0], global_avgpool_backward(grad, value_of(node.inputs[0]).shape()));
        break;
      case OpKind::concat: {
        std::vector<std::vector<std::size_t>> part_shapes;
        for (const auto& src : node.inputs) part_shapes.push_back(value_of(src).shape());
        std::vector<Tensor<Scalar>> parts = split_leading(grad, part_shapes);
        for (std::size_t i = 0; i < parts.size(); ++i)
          deposit(node.inputs[i], std::move(parts[i]));
        break;
      }
      case OpKind::softmax:
        // The target is a prelogit component; a terminal softmax sits past the
        // seed and never carries gradient, but handle it for completeness.
        deposit(node.inputs[0], softmax_backward(grad, trace.output(node.id)));
        break;
    }
  }
  return input_grad;
}

template <typename Scalar>
Tensor<Scalar> input_gradient(const ModelGraph<Scalar>& model, const Tensor<Scalar>& x,
                              std::size_t target, GradientMode mode = GradientMode::plain,
                              BackpropProbe<Scalar>* probe = nullptr) {
  const auto trace = forward(model, x);
  return input_gradient(model, x, trace, target, mode, probe);
}

/// One prelogit component as a scalar function of the input.
template <typename Scalar>
Scalar prelogit_value(const ModelGraph<Scalar>& model, const Tensor<Scalar>& x, std::size_t target) {
  const auto trace = forward(model, x);
  const Tensor<Scalar>& prelogits = trace.output(model.prelogits_id);
  if (target >= prelogits.size())
    raise(ErrorKind::invalid_target, "target " + std::to_string(target) + " out of range");
  return prelogits[target];
}

/// Central-difference gradient of prelogits[target]; the independent oracle
/// for the reverse-mode path.  Run on a double-precision model for meaningful
/// tolerances.
template <typename Scalar>
Tensor<Scalar> finite_difference_gradient(const ModelGraph<Scalar>& model, const Tensor<Scalar>& x,
                                          std::size_t target, Scalar h) {
  Tensor<Scalar> grad = Tensor<Scalar>::zeros(x.shape());
  Tensor<Scalar> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const Scalar up = prelogit_value(model, probe, target);
    probe[i] = x[i] - h;
    const Scalar down = prelogit_value(model, probe, target);
    probe[i] = x[i];
    grad[i] = (up - down) / (Scalar(2) * h);
  }
  return grad;
}

}  // namespace attrikit
