#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "attrikit/graph.hpp"
#include "attrikit/rng.hpp"

namespace attrikit {

namespace detail {

template <typename Scalar>
LayerNode<Scalar> conv_node(std::string id, std::string input, std::size_t c_in, std::size_t c_out,
                            std::size_t k, std::size_t stride, std::size_t padding) {
  LayerNode<Scalar> node;
  node.id = std::move(id);
  node.op = OpKind::conv2d;
  node.inputs = {std::move(input)};
  node.stride = stride;
  node.padding = padding;
  node.weights["kernel"] = Tensor<Scalar>::zeros({c_out, c_in, k, k});
  node.weights["bias"] = Tensor<Scalar>::zeros({c_out});
  return node;
}

template <typename Scalar>
LayerNode<Scalar> dense_node(std::string id, std::string input, std::size_t fan_in,
                             std::size_t fan_out) {
  LayerNode<Scalar> node;
  node.id = std::move(id);
  node.op = OpKind::dense;
  node.inputs = {std::move(input)};
  node.weights["weight"] = Tensor<Scalar>::zeros({fan_out, fan_in});
  node.weights["bias"] = Tensor<Scalar>::zeros({fan_out});
  return node;
}

template <typename Scalar>
LayerNode<Scalar> simple_node(std::string id, OpKind op, std::vector<std::string> inputs,
                              std::size_t window = 2, std::size_t stride = 2) {
  LayerNode<Scalar> node;
  node.id = std::move(id);
  node.op = op;
  node.inputs = std::move(inputs);
  node.window = window;
  node.stride = stride;
  return node;
}

template <typename Scalar>
LayerNode<Scalar> batchnorm_node(std::string id, std::string input, std::size_t channels,
                                 Scalar epsilon = Scalar(1e-3)) {
  LayerNode<Scalar> node;
  node.id = std::move(id);
  node.op = OpKind::batchnorm;
  node.inputs = {std::move(input)};
  node.weights["gamma"] = Tensor<Scalar>::full({channels}, Scalar(1));
  node.weights["beta"] = Tensor<Scalar>::zeros({channels});
  node.weights["running_mean"] = Tensor<Scalar>::zeros({channels});
  node.weights["running_var"] = Tensor<Scalar>::full({channels}, Scalar(1));
  node.weights["epsilon"] = Tensor<Scalar>::full({1}, epsilon);
  return node;
}

}  // namespace detail

/// The toy convolutional classifier used end to end: conv+BN+ReLU blocks, a
/// concat skip, max pooling, and a two-layer dense head behind a softmax.
/// Weights are zero until initialized or trained.
template <typename Scalar>
ModelGraph<Scalar> reference_cnn(std::size_t num_classes = 3, std::size_t image_size = 32) {
  if (image_size % 8 != 0 || image_size < 16)
    raise(ErrorKind::invalid_argument, "reference_cnn: image size must be a multiple of 8, >= 16");
  ModelGraph<Scalar> m;
  m.input_shape = {3, image_size, image_size};

  m.nodes.push_back(detail::conv_node<Scalar>("c1", kInputId, 3, 8, 3, 1, 1));
  m.nodes.push_back(detail::batchnorm_node<Scalar>("bn1", "c1", 8));
  m.nodes.push_back(detail::simple_node<Scalar>("r1", OpKind::relu, {"bn1"}));
  m.nodes.push_back(detail::simple_node<Scalar>("p1", OpKind::maxpool, {"r1"}, 2, 2));

  m.nodes.push_back(detail::conv_node<Scalar>("c2", "p1", 8, 16, 3, 1, 1));
  m.nodes.push_back(detail::batchnorm_node<Scalar>("bn2", "c2", 16));
  m.nodes.push_back(detail::simple_node<Scalar>("r2", OpKind::relu, {"bn2"}));
  m.nodes.push_back(detail::simple_node<Scalar>("cat", OpKind::concat, {"p1", "r2"}));
  m.nodes.push_back(detail::simple_node<Scalar>("p2", OpKind::maxpool, {"cat"}, 2, 2));

  m.nodes.push_back(detail::conv_node<Scalar>("c3", "p2", 24, 32, 3, 1, 1));
  m.nodes.push_back(detail::batchnorm_node<Scalar>("bn3", "c3", 32));
  m.nodes.push_back(detail::simple_node<Scalar>("r3", OpKind::relu, {"bn3"}));
  m.nodes.push_back(detail::simple_node<Scalar>("p3", OpKind::maxpool, {"r3"}, 2, 2));

  const std::size_t spatial = image_size / 8;
  m.nodes.push_back(detail::dense_node<Scalar>("d1", "p3", 32 * spatial * spatial, 64));
  m.nodes.push_back(detail::simple_node<Scalar>("r4", OpKind::relu, {"d1"}));
  m.nodes.push_back(detail::dense_node<Scalar>("logits", "r4", 64, num_classes));
  m.nodes.push_back(detail::simple_node<Scalar>("probs", OpKind::softmax, {"logits"}));

  m.output_id = "probs";
  m.prelogits_id = "logits";
  validate_model(m);
  return m;
}

struct RandomNetOptions {
  std::size_t input_channels = 2;
  std::size_t input_size = 6;       // spatial extent
  std::size_t conv_layers = 2;
  std::size_t num_outputs = 3;
  bool bias_free = false;           // zero biases everywhere (LRP / GI=LRP-z checks)
  bool with_concat = false;         // add a channel-concat skip around the last conv
  bool avgpool_only = true;         // true: average pooling (smooth for finite differences)
};

/// Small random conv+ReLU(+pool)+dense net for oracle suites; weights are
/// N(0, 1/fan_in)-style draws from the supplied stream.
template <typename Scalar>
ModelGraph<Scalar> make_random_net(Rng& rng, const RandomNetOptions& options = {}) {
  ModelGraph<Scalar> m;
  m.input_shape = {options.input_channels, options.input_size, options.input_size};

  const auto fill = [&](Tensor<Scalar>& t, double scale) {
    for (std::size_t i = 0; i < t.size(); ++i)
      t[i] = static_cast<Scalar>(rng.normal(0.0, scale));
  };

  std::string prev = kInputId;
  std::size_t channels = options.input_channels;
  std::size_t spatial = options.input_size;
  std::string concat_tap;      // earlier node the concat skip reads
  std::size_t concat_tap_channels = 0;

  for (std::size_t layer = 0; layer < options.conv_layers; ++layer) {
    const std::size_t c_out = 3 + layer;
    const std::string conv_id = "conv" + std::to_string(layer);
    auto conv = detail::conv_node<Scalar>(conv_id, prev, channels, c_out, 3, 1, 1);
    fill(conv.weights.at("kernel"), 1.0 / std::sqrt(static_cast<double>(channels) * 9.0));
    if (!options.bias_free) fill(conv.weights.at("bias"), 0.1);
    m.nodes.push_back(std::move(conv));

    const std::string relu_id = "act" + std::to_string(layer);
    m.nodes.push_back(detail::simple_node<Scalar>(relu_id, OpKind::relu, {conv_id}));
    prev = relu_id;
    channels = c_out;

    if (layer == 0 && options.with_concat) {
      concat_tap = relu_id;
      concat_tap_channels = channels;
    }
    if (layer + 1 == options.conv_layers && spatial % 2 == 0) {
      const std::string pool_id = "pool" + std::to_string(layer);
      if (options.with_concat && !concat_tap.empty()) {
        // join the skip before pooling so shapes agree
        auto cat = detail::simple_node<Scalar>("join", OpKind::concat, {concat_tap, prev});
        m.nodes.push_back(std::move(cat));
        prev = "join";
        channels += concat_tap_channels;
      }
      m.nodes.push_back(detail::simple_node<Scalar>(
          pool_id, options.avgpool_only ? OpKind::avgpool : OpKind::maxpool, {prev}, 2, 2));
      prev = pool_id;
      spatial /= 2;
    }
  }

  auto head = detail::dense_node<Scalar>("head", prev, channels * spatial * spatial,
                                         options.num_outputs);
  fill(head.weights.at("weight"),
       1.0 / std::sqrt(static_cast<double>(channels * spatial * spatial)));
  if (!options.bias_free) fill(head.weights.at("bias"), 0.1);
  m.nodes.push_back(std::move(head));

  m.output_id = "head";
  m.prelogits_id = "head";
  validate_model(m);
  return m;
}

/// One-dense-layer model: y = W x + b.  The nucleus of the worked examples.
template <typename Scalar>
ModelGraph<Scalar> one_dense_model(const Tensor<Scalar>& weight, const Tensor<Scalar>& bias) {
  ModelGraph<Scalar> m;
  m.input_shape = {weight.extent(1)};
  auto node = detail::dense_node<Scalar>("out", kInputId, weight.extent(1), weight.extent(0));
  node.weights["weight"] = weight;
  node.weights["bias"] = bias;
  m.nodes.push_back(std::move(node));
  m.output_id = "out";
  m.prelogits_id = "out";
  validate_model(m);
  return m;
}

}  // namespace attrikit
