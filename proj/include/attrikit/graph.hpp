#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "attrikit/kernels.hpp"
#include "attrikit/tensor.hpp"

namespace attrikit {

/// Reserved id that layer inputs use to reference the model input.
inline constexpr const char* kInputId = "input";

enum class OpKind { conv2d, dense, relu, batchnorm, maxpool, avgpool, globalavgpool, concat, softmax };

inline const char* op_kind_name(OpKind op) {
  switch (op) {
    case OpKind::conv2d: return "conv2d";
    case OpKind::dense: return "dense";
    case OpKind::relu: return "relu";
    case OpKind::batchnorm: return "batchnorm";
    case OpKind::maxpool: return "maxpool";
    case OpKind::avgpool: return "avgpool";
    case OpKind::globalavgpool: return "globalavgpool";
    case OpKind::concat: return "concat";
    case OpKind::softmax: return "softmax";
  }
  return "unknown";
}

inline OpKind op_kind_from_name(const std::string& name) {
  if (name == "conv2d") return OpKind::conv2d;
  if (name == "dense") return OpKind::dense;
  if (name == "relu") return OpKind::relu;
  if (name == "batchnorm") return OpKind::batchnorm;
  if (name == "maxpool") return OpKind::maxpool;
  if (name == "avgpool") return OpKind::avgpool;
  if (name == "globalavgpool") return OpKind::globalavgpool;
  if (name == "concat") return OpKind::concat;
  if (name == "softmax") return OpKind::softmax;
  raise(ErrorKind::unknown_op, "unknown op '" + name + "'");
}

/// One layer of the graph. Weight slots by op:
///   conv2d: kernel [C_out,C_in,kH,kW], bias [C_out]
///   dense: weight [m,n], bias [m]
///   batchnorm: gamma, beta, running_mean, running_var (all [C]), epsilon [1]
template <typename Scalar>
struct LayerNode {
  std::string id;
  OpKind op = OpKind::relu;
  std::vector<std::string> inputs;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t window = 2;
  std::size_t axis = 0;  // concat axis; only the leading axis is supported
  std::map<std::string, Tensor<Scalar>> weights;

  const Tensor<Scalar>& weight(const std::string& slot) const {
    auto it = weights.find(slot);
    if (it == weights.end())
      raise(ErrorKind::missing_weight, "node '" + id + "' has no weight slot '" + slot + "'");
    return it->second;
  }
};

/// Slot names in serialization order for each op.
inline std::vector<std::string> weight_slots(OpKind op) {
  switch (op) {
    case OpKind::conv2d: return {"kernel", "bias"};
    case OpKind::dense: return {"weight", "bias"};
    case OpKind::batchnorm: return {"gamma", "beta", "running_mean", "running_var", "epsilon"};
    default: return {};
  }
}

template <typename Scalar>
struct ModelGraph {
  std::vector<std::size_t> input_shape;
  std::vector<LayerNode<Scalar>> nodes;  // topologically ordered
  std::string output_id;
  std::string prelogits_id;

  std::size_t index_of(const std::string& id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].id == id) return i;
    raise(ErrorKind::invalid_target, "no node with id '" + id + "'");
  }

  const LayerNode<Scalar>& node(const std::string& id) const { return nodes[index_of(id)]; }
  bool has_node(const std::string& id) const {
    for (const auto& n : nodes)
      if (n.id == id) return true;
    return false;
  }
};

template <typename Scalar>
struct ForwardTrace {
  std::map<std::string, Tensor<Scalar>> outputs;
  std::map<std::string, std::vector<std::size_t>> pool_argmax;
  std::map<std::string, Tensor<Scalar>> relu_masks;

  const Tensor<Scalar>& output(const std::string& id) const {
    auto it = outputs.find(id);
    if (it == outputs.end()) raise(ErrorKind::invalid_target, "trace has no node '" + id + "'");
    return it->second;
  }
};

namespace detail {

template <typename Scalar>
std::vector<std::size_t> infer_node_shape(const LayerNode<Scalar>& node,
                                          const std::vector<std::vector<std::size_t>>& in_shapes) {
  const auto arity_error = [&](std::size_t want) {
    if (in_shapes.size() != want)
      raise(ErrorKind::shape_mismatch, "node '" + node.id + "' (" + op_kind_name(node.op) +
                                           ") expects " + std::to_string(want) + " input(s)");
  };
  switch (node.op) {
    case OpKind::conv2d: {
      arity_error(1);
      const auto& in = in_shapes[0];
      if (in.size() != 3)
        raise(ErrorKind::shape_mismatch, "node '" + node.id + "': conv2d input must be [C,H,W]");
      const auto& kernel = node.weight("kernel");
      const auto& bias = node.weight("bias");
      if (kernel.rank() != 4 || kernel.extent(1) != in[0])
        raise(ErrorKind::shape_mismatch, "node '" + node.id + "': kernel " +
                                             shape_to_string(kernel.shape()) +
                                             " inconsistent with input " + shape_to_string(in));
      if (bias.rank() != 1 || bias.extent(0) != kernel.extent(0))
        raise(ErrorKind::shape_mismatch, "node '" + node.id + "': bias shape inconsistent");
      const std::size_t oh = conv_output_extent(in[1], kernel.extent(2), node.stride, node.padding, "conv2d");
      const std::size_t ow = conv_output_extent(in[2], kernel.extent(3), node.stride, node.padding, "conv2d");
      return {kernel.extent(0), oh, ow};
    }
    case OpKind::dense: {
      arity_error(1);
      std::size_t flat = 1;
      for (std::size_t e : in_shapes[0]) flat *= e;
      const auto& weight = node.weight("weight");
      const auto& bias = node.weight("bias");
      if (weight.rank() != 2 || weight.extent(1) != flat)
        raise(ErrorKind::shape_mismatch, "node '" + node.id + "': weight " +
                                             shape_to_string(weight.shape()) +
                                             " does not accept flattened input of " + std::to_string(flat));
      if (bias.rank() != 1 || bias.extent(0) != weight.extent(0))
        raise(ErrorKind::shape_mismatch, "node '" + node.id + "': bias shape inconsistent");
      return {weight.extent(0)};
    }
    case OpKind::relu:
      arity_error(1);
      return in_shapes[0];
    case OpKind::batchnorm: {
      arity_error(1);
      const auto& in = in_shapes[0];
      const std::size_t channels = in[0];
      for (const char* slot : {"gamma", "beta", "running_mean", "running_var"}) {
        const auto& t = node.weight(slot);
        if (t.rank() != 1 || t.extent(0) != channels)
          raise(ErrorKind::shape_mismatch, "node '" + node.id + "': batchnorm slot '" + slot +
                                               "' must be [" + std::to_string(channels) + "]");
      }
      const auto& eps = node.weight("epsilon");
      if (eps.size() != 1)
        raise(ErrorKind::shape_mismatch, "node '" + node.id + "': epsilon must hold one value");
      return in;
    }
    case OpKind::maxpool:
    case OpKind::avgpool: {
      arity_error(1);
      const auto& in = in_shapes[0];
      if (in.size() != 3)
        raise(ErrorKind::shape_mismatch, "node '" + node.id + "': pool input must be [C,H,W]");
      const std::size_t oh = conv_output_extent(in[1], node.window, node.stride, 0, "pool");
      const std::size_t ow = conv_output_extent(in[2], node.window, node.stride, 0, "pool");
      return {in[0], oh, ow};
    }
    case OpKind::globalavgpool: {
      arity_error(1);
      const auto& in = in_shapes[0];
      if (in.size() != 3)
        raise(ErrorKind::shape_mismatch, "node '" + node.id + "': globalavgpool input must be [C,H,W]");
      return {in[0]};
    }
    case OpKind::concat: {
      if (in_shapes.size() < 2)
        raise(ErrorKind::shape_mismatch, "node '" + node.id + "': concat needs >= 2 inputs");
      if (node.axis != 0)
        raise(ErrorKind::invalid_argument, "node '" + node.id + "': only axis 0 concat is supported");
      std::vector<std::size_t> out = in_shapes[0];
      for (std::size_t i = 1; i < in_shapes.size(); ++i) {
        const auto& s = in_shapes[i];
        if (s.size() != out.size())
          raise(ErrorKind::shape_mismatch, "node '" + node.id + "': concat rank mismatch");
        for (std::size_t axis = 1; axis < s.size(); ++axis)
          if (s[axis] != out[axis])
            raise(ErrorKind::shape_mismatch, "node '" + node.id + "': concat non-channel extents disagree");
        out[0] += s[0];
      }
      return out;
    }
    case OpKind::softmax: {
      arity_error(1);
      if (in_shapes[0].size() != 1)
        raise(ErrorKind::shape_mismatch, "node '" + node.id + "': softmax input must be rank 1");
      return in_shapes[0];
    }
  }
  raise(ErrorKind::unknown_op, "node '" + node.id + "'");
}

}  // namespace detail

/// Static output shape of every node; validates weight/geometry consistency.
template <typename Scalar>
std::map<std::string, std::vector<std::size_t>> infer_shapes(const ModelGraph<Scalar>& model) {
  std::map<std::string, std::vector<std::size_t>> shapes;
  shapes[kInputId] = model.input_shape;
  for (const auto& node : model.nodes) {
    std::vector<std::vector<std::size_t>> in_shapes;
    for (const auto& src : node.inputs) {
      auto it = shapes.find(src);
      if (it == shapes.end())
        raise(ErrorKind::cyclic_graph,
              "node '" + node.id + "' references '" + src + "' which is not an earlier node");
      in_shapes.push_back(it->second);
    }
    shapes[node.id] = detail::infer_node_shape(node, in_shapes);
  }
  return shapes;
}

/// Full structural validation. Used by the loader and by tests; forward()
/// assumes a validated graph.
template <typename Scalar>
void validate_model(const ModelGraph<Scalar>& model) {
  if (model.input_shape.empty())
    raise(ErrorKind::shape_mismatch, "model input shape is empty");
  if (model.nodes.empty()) raise(ErrorKind::format_error, "model has no nodes");

  std::set<std::string> seen;
  for (const auto& node : model.nodes) {
    if (node.id == kInputId)
      raise(ErrorKind::format_error, "node id 'input' is reserved");
    if (!seen.insert(node.id).second)
      raise(ErrorKind::format_error, "duplicate node id '" + node.id + "'");
    for (const std::string& slot : weight_slots(node.op))
      node.weight(slot);  // raises missing_weight
    if (node.inputs.empty())
      raise(ErrorKind::format_error, "node '" + node.id + "' has no inputs");
  }

  infer_shapes(model);  // topology + shape consistency

  if (!model.has_node(model.output_id))
    raise(ErrorKind::format_error, "output_id '" + model.output_id + "' is not a node");
  if (!model.has_node(model.prelogits_id))
    raise(ErrorKind::format_error, "prelogits_id '" + model.prelogits_id + "' is not a node");

  for (const auto& node : model.nodes) {
    if (node.op != OpKind::softmax) continue;
    if (node.id != model.output_id)
      raise(ErrorKind::format_error, "softmax node '" + node.id + "' must be the terminal node");
    if (node.inputs.size() != 1)
      raise(ErrorKind::format_error, "softmax node must have exactly one input");
    if (node.inputs[0] != model.prelogits_id)
      raise(ErrorKind::format_error, "prelogits_id must be the softmax node's sole input");
  }
}

namespace detail {

template <typename Scalar>
Tensor<Scalar> batchnorm_inference(const LayerNode<Scalar>& node, const Tensor<Scalar>& in) {
  const auto& gamma = node.weight("gamma");
  const auto& beta = node.weight("beta");
  const auto& mean = node.weight("running_mean");
  const auto& var = node.weight("running_var");
  const Scalar eps = node.weight("epsilon")[0];
  const std::size_t channels = in.extent(0);
  const std::size_t per_channel = in.size() / channels;
  Tensor<Scalar> out = Tensor<Scalar>::zeros(in.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    const Scalar s = gamma[c] / std::sqrt(var[c] + eps);
    const Scalar t = beta[c] - mean[c] * s;
    for (std::size_t i = 0; i < per_channel; ++i)
      out[c * per_channel + i] = in[c * per_channel + i] * s + t;
  }
  return out;
}

}  // namespace detail

/// Evaluate the graph on one input, recording every node's output plus
/// pooling argmax indices and ReLU activity masks.
template <typename Scalar>
ForwardTrace<Scalar> forward(const ModelGraph<Scalar>& model, const Tensor<Scalar>& x) {
  if (x.shape() != model.input_shape)
    raise(ErrorKind::shape_mismatch, "forward: input " + shape_to_string(x.shape()) +
                                         " does not match model input " +
                                         shape_to_string(model.input_shape));
  x.validate_finite("forward input");

  ForwardTrace<Scalar> trace;
  const auto lookup = [&](const std::string& id) -> const Tensor<Scalar>& {
    if (id == kInputId) return x;
    return trace.output(id);
  };

  for (const auto& node : model.nodes) {
    Tensor<Scalar> out;
    switch (node.op) {
      case OpKind::conv2d:
        out = conv2d_forward(lookup(node.inputs[0]), node.weight("kernel"), node.weight("bias"),
                             node.stride, node.padding);
        break;
      case OpKind::dense: {
        const Tensor<Scalar>& in = lookup(node.inputs[0]);
        out = dense_forward(in.reshaped({in.size()}), node.weight("weight"), node.weight("bias"));
        break;
      }
      case OpKind::relu: {
        const Tensor<Scalar>& in = lookup(node.inputs[0]);
        out = relu_forward(in);
        trace.relu_masks[node.id] = relu_mask(in);
        break;
      }
      case OpKind::batchnorm:
        out = detail::batchnorm_inference(node, lookup(node.inputs[0]));
        break;
      case OpKind::maxpool: {
        auto pooled = pool_forward(lookup(node.inputs[0]), PoolKind::max, node.window, node.stride);
        out = std::move(pooled.output);
        trace.pool_argmax[node.id] = std::move(pooled.argmax);
        break;
      }
      case OpKind::avgpool:
        out = pool_forward(lookup(node.inputs[0]), PoolKind::average, node.window, node.stride).output;
        break;
      case OpKind::globalavgpool:
        out = global_avgpool_forward(lookup(node.inputs[0]));
        break;
      case OpKind::concat: {
        std::vector<Tensor<Scalar>> parts;
        for (const auto& src : node.inputs) parts.push_back(lookup(src));
        out = concat_leading(parts);
        break;
      }
      case OpKind::softmax:
        out = softmax_forward(lookup(node.inputs[0]));
        break;
    }
    if (!out.all_finite())
      raise(ErrorKind::non_finite, "forward: non-finite output at node '" + node.id + "'");
    trace.outputs[node.id] = std::move(out);
  }
  return trace;
}

template <typename Scalar>
struct Prediction {
  std::size_t class_index = 0;
  Tensor<Scalar> prelogits;
};

/// Argmax over the pre-softmax activations (ties -> lowest index).
template <typename Scalar>
Prediction<Scalar> predict(const ModelGraph<Scalar>& model, const Tensor<Scalar>& x) {
  const auto trace = forward(model, x);
  Prediction<Scalar> p;
  p.prelogits = trace.output(model.prelogits_id);
  p.class_index = argmax(p.prelogits);
  return p;
}

/// Remove batchnorm nodes by rescaling the preceding conv/dense weights:
/// w' = w * g / sqrt(var + eps), b' = (b - mean) * g / sqrt(var + eps) + beta.
template <typename Scalar>
ModelGraph<Scalar> fold_batchnorm(const ModelGraph<Scalar>& model) {
  // consumer counts guard against folding into a layer that feeds other nodes
  std::map<std::string, std::size_t> consumers;
  for (const auto& node : model.nodes)
    for (const auto& src : node.inputs) consumers[src]++;

  ModelGraph<Scalar> folded;
  folded.input_shape = model.input_shape;
  folded.output_id = model.output_id;
  folded.prelogits_id = model.prelogits_id;

  std::map<std::string, std::string> rename;  // bn id -> producer id
  for (const auto& node : model.nodes) {
    if (node.op != OpKind::batchnorm) {
      LayerNode<Scalar> copy = node;
      for (auto& src : copy.inputs) {
        auto it = rename.find(src);
        if (it != rename.end()) src = it->second;
      }
      folded.nodes.push_back(std::move(copy));
      continue;
    }

    const std::string& src_id = node.inputs.at(0);
    if (src_id == kInputId)
      raise(ErrorKind::unfoldable_batchnorm,
            "batchnorm '" + node.id + "' is applied directly to the model input");
    bool folded_in = false;
    for (auto& prev : folded.nodes) {
      if (prev.id != src_id) continue;
      if (prev.op != OpKind::conv2d && prev.op != OpKind::dense)
        raise(ErrorKind::unfoldable_batchnorm,
              "batchnorm '" + node.id + "' must follow conv2d or dense, found " +
                  op_kind_name(prev.op));
      if (consumers[src_id] != 1)
        raise(ErrorKind::unfoldable_batchnorm,
              "batchnorm '" + node.id + "' input '" + src_id + "' feeds other nodes");
      const auto& gamma = node.weight("gamma");
      const auto& beta = node.weight("beta");
      const auto& mean = node.weight("running_mean");
      const auto& var = node.weight("running_var");
      const Scalar eps = node.weight("epsilon")[0];

      const std::string w_slot = prev.op == OpKind::conv2d ? "kernel" : "weight";
      Tensor<Scalar> w = prev.weight(w_slot);
      Tensor<Scalar> b = prev.weight("bias");
      const std::size_t channels = w.extent(0);
      const std::size_t per_channel = w.size() / channels;
      for (std::size_t c = 0; c < channels; ++c) {
        const Scalar s = gamma[c] / std::sqrt(var[c] + eps);
        for (std::size_t i = 0; i < per_channel; ++i) w[c * per_channel + i] *= s;
        b[c] = (b[c] - mean[c]) * s + beta[c];
      }
      prev.weights[w_slot] = std::move(w);
      prev.weights["bias"] = std::move(b);
      folded_in = true;
      break;
    }
    if (!folded_in)
      raise(ErrorKind::unfoldable_batchnorm,
            "batchnorm '" + node.id + "' input '" + src_id + "' not found before it");
    rename[node.id] = src_id;
  }

  for (auto& [bn_id, new_id] : rename) {
    if (folded.output_id == bn_id) folded.output_id = new_id;
    if (folded.prelogits_id == bn_id) folded.prelogits_id = new_id;
  }
  validate_model(folded);
  return folded;
}

template <typename To, typename From>
ModelGraph<To> cast_model(const ModelGraph<From>& model) {
  ModelGraph<To> out;
  out.input_shape = model.input_shape;
  out.output_id = model.output_id;
  out.prelogits_id = model.prelogits_id;
  for (const auto& node : model.nodes) {
    LayerNode<To> copy;
    copy.id = node.id;
    copy.op = node.op;
    copy.inputs = node.inputs;
    copy.stride = node.stride;
    copy.padding = node.padding;
    copy.window = node.window;
    copy.axis = node.axis;
    for (const auto& [slot, tensor] : node.weights)
      copy.weights[slot] = tensor.template cast<To>();
    out.nodes.push_back(std::move(copy));
  }
  return out;
}

}  // namespace attrikit
