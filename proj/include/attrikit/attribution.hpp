#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "attrikit/autodiff.hpp"
#include "attrikit/graph.hpp"
#include "attrikit/model_io.hpp"
#include "attrikit/rng.hpp"

namespace attrikit {

// --- method tags ---

enum class Method {
  saliency,
  gradient_input,
  guided_backprop,
  smoothgrad,
  integrated_gradients,
  deep_taylor,
  lrp_z,
  lrp_epsilon,
};

inline const char* method_name(Method m) {
  switch (m) {
    case Method::saliency: return "saliency";
    case Method::gradient_input: return "gi";
    case Method::guided_backprop: return "gbp";
    case Method::smoothgrad: return "sg";
    case Method::integrated_gradients: return "ig";
    case Method::deep_taylor: return "dtd";
    case Method::lrp_z: return "lrp-z";
    case Method::lrp_epsilon: return "lrp-eps";
  }
  return "?";
}

/// All eight methods in their fixed presentation order.
inline const std::vector<Method>& all_methods() {
  static const std::vector<Method> order = {
      Method::saliency,        Method::gradient_input, Method::guided_backprop,
      Method::smoothgrad,      Method::integrated_gradients,
      Method::deep_taylor,     Method::lrp_z,          Method::lrp_epsilon};
  return order;
}

inline Method method_from_name(const std::string& name) {
  for (Method m : all_methods())
    if (name == method_name(m)) return m;
  raise(ErrorKind::invalid_argument, "unknown method '" + name +
                                         "' (expected one of saliency gi gbp sg ig dtd lrp-z lrp-eps)");
}

/// Per-method knobs; fields are read only by the methods they belong to.
struct MethodParams {
  // smoothgrad
  std::size_t sg_samples = 50;
  std::optional<double> sg_sigma;  // input units; unset -> 0.15 * (max(x) - min(x))
  std::uint64_t sg_seed = 0;
  // integrated gradients
  std::size_t ig_steps = 300;
  std::string ig_baseline = "zeros";  // named preset; "zeros" is the only built-in
  // lrp
  double lrp_epsilon = 0.01;
  bool lrp_batchnorm_linear = false;  // opt-in: propagate through BN as a 1x1 linear map
  // deep taylor
  double dtd_low = 0.0;
  double dtd_high = 1.0;
};

// --- gradient-family methods (raw maps, input-shaped) ---

template <typename Scalar>
Tensor<Scalar> saliency_raw(const ModelGraph<Scalar>& model, const Tensor<Scalar>& x,
                            std::size_t target) {
  return input_gradient(model, x, target, GradientMode::plain);
}

template <typename Scalar>
Tensor<Scalar> gradient_times_input_raw(const ModelGraph<Scalar>& model, const Tensor<Scalar>& x,
                                        std::size_t target) {
  return hadamard(x, saliency_raw(model, x, target));
}

template <typename Scalar>
Tensor<Scalar> guided_backprop_raw(const ModelGraph<Scalar>& model, const Tensor<Scalar>& x,
                                   std::size_t target) {
  return input_gradient(model, x, target, GradientMode::guided);
}

/// Mean saliency over n_samples Gaussian-noised copies of the input.
/// sigma unset -> 0.15 * (max(x) - min(x)); sigma == 0 returns saliency itself.
template <typename Scalar>
Tensor<Scalar> smoothgrad_raw(const ModelGraph<Scalar>& model, const Tensor<Scalar>& x,
                              std::size_t target, std::size_t n_samples,
                              std::optional<Scalar> sigma, std::uint64_t seed) {
  if (n_samples < 1) raise(ErrorKind::invalid_argument, "smoothgrad: n_samples must be >= 1");
  Scalar sd;
  if (sigma.has_value()) {
    sd = *sigma;
    if (sd < Scalar(0)) raise(ErrorKind::invalid_argument, "smoothgrad: sigma must be >= 0");
  } else {
    sd = Scalar(0.15) * (max_value(x) - min_value(x));
  }
  if (sd == Scalar(0)) return saliency_raw(model, x, target);

  Rng rng(seed);
  Tensor<Scalar> acc = Tensor<Scalar>::zeros(x.shape());
  for (std::size_t s = 0; s < n_samples; ++s) {
    Tensor<Scalar> noisy = x;
    for (std::size_t i = 0; i < noisy.size(); ++i)
      noisy[i] += static_cast<Scalar>(rng.normal(0.0, static_cast<double>(sd)));
    accumulate(acc, saliency_raw(model, noisy, target));
  }
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] /= static_cast<Scalar>(n_samples);
  return acc;
}

/// Midpoint-rule path integral of gradients from baseline to x, scaled by
/// (x - baseline).  Null baseline means all-zeros.
template <typename Scalar>
Tensor<Scalar> integrated_gradients_raw(const ModelGraph<Scalar>& model, const Tensor<Scalar>& x,
                                        std::size_t target, std::size_t steps,
                                        const Tensor<Scalar>* baseline = nullptr) {
  if (steps < 1) raise(ErrorKind::invalid_argument, "integrated_gradients: steps must be >= 1");
  Tensor<Scalar> base = baseline ? *baseline : Tensor<Scalar>::zeros(x.shape());
  require_same_shape(x, base, "integrated_gradients baseline");

  const Tensor<Scalar> delta = sub(x, base);
  Tensor<Scalar> acc = Tensor<Scalar>::zeros(x.shape());
  for (std::size_t k = 1; k <= steps; ++k) {
    const Scalar alpha = (static_cast<Scalar>(k) - Scalar(0.5)) / static_cast<Scalar>(steps);
    Tensor<Scalar> point = base;
    for (std::size_t i = 0; i < point.size(); ++i) point[i] += alpha * delta[i];
    accumulate(acc, input_gradient(model, point, target));
  }
  for (std::size_t i = 0; i < acc.size(); ++i)
    acc[i] = delta[i] * (acc[i] / static_cast<Scalar>(steps));
  return acc;
}

// --- relevance-propagation methods ---

namespace detail {

/// R_k / d_k with the shared degeneracy rule: a zero denominator is an error
/// only where it would have to carry nonzero relevance.
template <typename Scalar>
Tensor<Scalar> relevance_ratio(const Tensor<Scalar>& relevance, const Tensor<Scalar>& denom,
                               const std::string& node_id) {
  Tensor<Scalar> s = Tensor<Scalar>::zeros(relevance.shape());
  for (std::size_t i = 0; i < relevance.size(); ++i) {
    if (denom[i] == Scalar(0)) {
      if (relevance[i] != Scalar(0))
        raise(ErrorKind::numerical_degeneracy,
              "relevance propagation hit an exact-zero denominator with nonzero relevance at node '" +
                  node_id + "'");
      continue;
    }
    s[i] = relevance[i] / denom[i];
  }
  return s;
}

template <typename Scalar>
Tensor<Scalar> stabilized(const Tensor<Scalar>& z, Scalar epsilon) {
  return map(z, [epsilon](Scalar v) {
    if (v > Scalar(0)) return v + epsilon;
    if (v < Scalar(0)) return v - epsilon;
    return v;  // sign(0) = 0: no stabilizer, the degeneracy rule decides
  });
}

template <typename Scalar>
Tensor<Scalar> positive_part(const Tensor<Scalar>& t) {
  return map(t, [](Scalar v) { return v > Scalar(0) ? v : Scalar(0); });
}

template <typename Scalar>
Tensor<Scalar> negative_part(const Tensor<Scalar>& t) {
  return map(t, [](Scalar v) { return v < Scalar(0) ? v : Scalar(0); });
}

enum class RelevanceRule { lrp, deep_taylor };

/// Shared reverse walk for lrp / deep_taylor.  For lrp the seed is
/// A_target; for deep_taylor it is max(A_target, 0) and linear layers use the
/// z+ rule (z^B at a pixel-domain input layer).
template <typename Scalar>
Tensor<Scalar> propagate_relevance(const ModelGraph<Scalar>& model, const Tensor<Scalar>& x,
                                   const ForwardTrace<Scalar>& trace, std::size_t target,
                                   RelevanceRule rule, Scalar epsilon, bool batchnorm_linear,
                                   Scalar low, Scalar high) {
  const Tensor<Scalar>& prelogits = trace.output(model.prelogits_id);
  if (target >= prelogits.size())
    raise(ErrorKind::invalid_target, "relevance target " + std::to_string(target) +
                                         " out of range for " + std::to_string(prelogits.size()) +
                                         " prelogit value(s)");

  const auto value_of = [&](const std::string& id) -> const Tensor<Scalar>& {
    if (id == kInputId) return x;
    return trace.output(id);
  };

  // z^B applies where a linear layer reads the pixel-domain (rank-3) input;
  // toy vector inputs keep the z+ rule throughout.
  const bool input_is_image = model.input_shape.size() == 3;

  std::map<std::string, Tensor<Scalar>> rel;
  Tensor<Scalar> seed = Tensor<Scalar>::zeros(prelogits.shape());
  seed[target] = rule == RelevanceRule::deep_taylor
                     ? (prelogits[target] > Scalar(0) ? prelogits[target] : Scalar(0))
                     : prelogits[target];
  rel[model.prelogits_id] = std::move(seed);

  Tensor<Scalar> input_rel = Tensor<Scalar>::zeros(model.input_shape);
  const auto deposit = [&](const std::string& id, Tensor<Scalar>&& r) {
    if (id == kInputId) {
      accumulate(input_rel, r);
      return;
    }
    auto it = rel.find(id);
    if (it == rel.end())
      rel.emplace(id, std::move(r));
    else
      accumulate(it->second, r);
  };

  for (auto node_it = model.nodes.rbegin(); node_it != model.nodes.rend(); ++node_it) {
    const LayerNode<Scalar>& node = *node_it;
    auto rel_it = rel.find(node.id);
    if (rel_it == rel.end()) continue;
    const Tensor<Scalar> relevance = std::move(rel_it->second);
    rel.erase(rel_it);

    switch (node.op) {
      case OpKind::conv2d: {
        const Tensor<Scalar>& a = value_of(node.inputs[0]);
        const Tensor<Scalar>& kernel = node.weight("kernel");
        if (rule == RelevanceRule::lrp) {
          // z-rule; bias sits in the denominator (it is part of the output)
          // and its share of relevance is not redistributed.
          const Tensor<Scalar> denom = stabilized(trace.output(node.id), epsilon);
          const Tensor<Scalar> s = relevance_ratio(relevance, denom, node.id);
          deposit(node.inputs[0],
                  hadamard(a, conv2d_input_grad(s, kernel, a.shape(), node.stride, node.padding)));
        } else if (input_is_image && node.inputs[0] == kInputId) {
          // z^B: relevance for a box-constrained pixel domain [low, high].
          const Tensor<Scalar> wp = positive_part(kernel);
          const Tensor<Scalar> wn = negative_part(kernel);
          const Tensor<Scalar> zero_bias = Tensor<Scalar>::zeros({kernel.extent(0)});
          const Tensor<Scalar> lows = Tensor<Scalar>::full(a.shape(), low);
          const Tensor<Scalar> highs = Tensor<Scalar>::full(a.shape(), high);
          Tensor<Scalar> denom = conv2d_forward(a, kernel, zero_bias, node.stride, node.padding);
          denom = sub(denom, conv2d_forward(lows, wp, zero_bias, node.stride, node.padding));
          denom = sub(denom, conv2d_forward(highs, wn, zero_bias, node.stride, node.padding));
          const Tensor<Scalar> s = relevance_ratio(relevance, denom, node.id);
          const Tensor<Scalar> c = conv2d_input_grad(s, kernel, a.shape(), node.stride, node.padding);
          const Tensor<Scalar> cp = conv2d_input_grad(s, wp, a.shape(), node.stride, node.padding);
          const Tensor<Scalar> cn = conv2d_input_grad(s, wn, a.shape(), node.stride, node.padding);
          Tensor<Scalar> r = Tensor<Scalar>::zeros(a.shape());
          for (std::size_t i = 0; i < r.size(); ++i)
            r[i] = a[i] * c[i] - low * cp[i] - high * cn[i];
          deposit(node.inputs[0], std::move(r));
        } else {
          // z+: only positive weights contribute; no bias in the denominator.
          const Tensor<Scalar> wp = positive_part(kernel);
          const Tensor<Scalar> zero_bias = Tensor<Scalar>::zeros({kernel.extent(0)});
          const Tensor<Scalar> denom = conv2d_forward(a, wp, zero_bias, node.stride, node.padding);
          const Tensor<Scalar> s = relevance_ratio(relevance, denom, node.id);
          deposit(node.inputs[0],
                  hadamard(a, conv2d_input_grad(s, wp, a.shape(), node.stride, node.padding)));
        }
        break;
      }
      case OpKind::dense: {
        const Tensor<Scalar>& a = value_of(node.inputs[0]);
        const Tensor<Scalar> flat = a.reshaped({a.size()});
        const Tensor<Scalar>& weight = node.weight("weight");
        Tensor<Scalar> r_flat;
        if (rule == RelevanceRule::lrp) {
          const Tensor<Scalar> denom = stabilized(trace.output(node.id), epsilon);
          const Tensor<Scalar> s = relevance_ratio(relevance, denom, node.id);
          r_flat = hadamard(flat, dense_input_grad(s, weight));
        } else if (input_is_image && node.inputs[0] == kInputId) {
          const Tensor<Scalar> wp = positive_part(weight);
          const Tensor<Scalar> wn = negative_part(weight);
          const Tensor<Scalar> zero_bias = Tensor<Scalar>::zeros({weight.extent(0)});
          const Tensor<Scalar> lows = Tensor<Scalar>::full(flat.shape(), low);
          const Tensor<Scalar> highs = Tensor<Scalar>::full(flat.shape(), high);
          Tensor<Scalar> denom = dense_forward(flat, weight, zero_bias);
          denom = sub(denom, dense_forward(lows, wp, zero_bias));
          denom = sub(denom, dense_forward(highs, wn, zero_bias));
          const Tensor<Scalar> s = relevance_ratio(relevance, denom, node.id);
          const Tensor<Scalar> c = dense_input_grad(s, weight);
          const Tensor<Scalar> cp = dense_input_grad(s, wp);
          const Tensor<Scalar> cn = dense_input_grad(s, wn);
          r_flat = Tensor<Scalar>::zeros(flat.shape());
          for (std::size_t i = 0; i < r_flat.size(); ++i)
            r_flat[i] = flat[i] * c[i] - low * cp[i] - high * cn[i];
        } else {
          const Tensor<Scalar> wp = positive_part(weight);
          const Tensor<Scalar> zero_bias = Tensor<Scalar>::zeros({weight.extent(0)});
          const Tensor<Scalar> denom = dense_forward(flat, wp, zero_bias);
          const Tensor<Scalar> s = relevance_ratio(relevance, denom, node.id);
          r_flat = hadamard(flat, dense_input_grad(s, wp));
        }
        deposit(node.inputs[0], r_flat.reshaped(a.shape()));
        break;
      }
      case OpKind::relu:
        deposit(node.inputs[0], Tensor<Scalar>(relevance));
        break;
      case OpKind::maxpool:
        // winner-take-all: the recorded argmax receives everything
        deposit(node.inputs[0], maxpool_backward(relevance, trace.pool_argmax.at(node.id),
                                                 value_of(node.inputs[0]).shape()));
        break;
      case OpKind::avgpool: {
        // proportional z-rule: contribution of each window member is a_j / n
        const Tensor<Scalar>& a = value_of(node.inputs[0]);
        const Tensor<Scalar> denom = rule == RelevanceRule::lrp
                                         ? stabilized(trace.output(node.id), epsilon)
                                         : trace.output(node.id);
        const Tensor<Scalar> s = relevance_ratio(relevance, denom, node.id);
        deposit(node.inputs[0], hadamard(a, avgpool_backward(s, node.window, node.stride, a.shape())));
        break;
      }
      case OpKind::globalavgpool: {
        const Tensor<Scalar>& a = value_of(node.inputs[0]);
        const Tensor<Scalar> denom = rule == RelevanceRule::lrp
                                         ? stabilized(trace.output(node.id), epsilon)
                                         : trace.output(node.id);
        const Tensor<Scalar> s = relevance_ratio(relevance, denom, node.id);
        deposit(node.inputs[0], hadamard(a, global_avgpool_backward(s, a.shape())));
        break;
      }
      case OpKind::concat: {
        std::vector<std::vector<std::size_t>> part_shapes;
        for (const auto& src : node.inputs) part_shapes.push_back(value_of(src).shape());
        std::vector<Tensor<Scalar>> parts = split_leading(relevance, part_shapes);
        for (std::size_t i = 0; i < parts.size(); ++i) deposit(node.inputs[i], std::move(parts[i]));
        break;
      }
      case OpKind::batchnorm: {
        if (rule != RelevanceRule::lrp || !batchnorm_linear)
          raise(ErrorKind::unsupported_node,
                "node '" + node.id +
                    "' (batchnorm) has no relevance rule; apply fold_batchnorm to the model first");
        // opt-in path: BN as a per-channel 1x1 linear map, epsilon-stabilized
        const Tensor<Scalar>& a = value_of(node.inputs[0]);
        const auto& gamma = node.weight("gamma");
        const auto& var = node.weight("running_var");
        const Scalar bn_eps = node.weight("epsilon")[0];
        const Tensor<Scalar> denom = stabilized(trace.output(node.id), epsilon);
        const Tensor<Scalar> s = relevance_ratio(relevance, denom, node.id);
        const std::size_t channels = a.extent(0);
        const std::size_t per_channel = a.size() / channels;
        Tensor<Scalar> r = Tensor<Scalar>::zeros(a.shape());
        for (std::size_t c = 0; c < channels; ++c) {
          const Scalar scale = gamma[c] / std::sqrt(var[c] + bn_eps);
          for (std::size_t i = 0; i < per_channel; ++i) {
            const std::size_t idx = c * per_channel + i;
            r[idx] = a[idx] * scale * s[idx];
          }
        }
        deposit(node.inputs[0], std::move(r));
        break;
      }
      case OpKind::softmax:
        raise(ErrorKind::unsupported_node,
              "node '" + node.id + "' (softmax) cannot carry relevance; target the prelogits");
    }
  }
  return input_rel;
}

}  // namespace detail

/// Layer-wise relevance propagation with the z-rule; epsilon = 0 is the plain
/// z variant, epsilon > 0 the stabilized one.
template <typename Scalar>
Tensor<Scalar> lrp_raw(const ModelGraph<Scalar>& model, const Tensor<Scalar>& x, std::size_t target,
                       Scalar epsilon, bool batchnorm_linear = false) {
  if (epsilon < Scalar(0)) raise(ErrorKind::invalid_argument, "lrp: epsilon must be >= 0");
  const auto trace = forward(model, x);
  return detail::propagate_relevance(model, x, trace, target, detail::RelevanceRule::lrp, epsilon,
                                     batchnorm_linear, Scalar(0), Scalar(1));
}

/// Deep Taylor decomposition: z+ rule on hidden linear layers, bounded-domain
/// z^B rule where a linear layer reads the pixel (rank-3) input.
template <typename Scalar>
Tensor<Scalar> deep_taylor_raw(const ModelGraph<Scalar>& model, const Tensor<Scalar>& x,
                               std::size_t target, Scalar input_low = Scalar(0),
                               Scalar input_high = Scalar(1)) {
  if (!(input_low < input_high))
    raise(ErrorKind::invalid_argument, "deep_taylor: input_low must be < input_high");
  const auto trace = forward(model, x);
  return detail::propagate_relevance(model, x, trace, target, detail::RelevanceRule::deep_taylor,
                                     Scalar(0), false, input_low, input_high);
}

// --- ExplanationMap and the explanation file ---

inline constexpr char kExplanationMagic[4] = {'E', 'X', 'P', 'L'};
inline constexpr std::uint8_t kExplanationVersion = 1;
inline constexpr std::uint8_t kExplanationDtypeF32 = 1;

/// Signed per-pixel importance scores plus the channel-aggregated display
/// form and the metadata needed to reproduce them.
struct ExplanationMap {
  Tensor<float> raw;      // [C,H,W]
  Tensor<float> reduced;  // [H,W], sum of |raw| over channels
  std::string method;
  std::string target_layer;
  std::size_t target = 0;
  std::string metadata_json;  // verbatim file metadata; reproduced bit-exactly on save
};

/// Channel aggregation used for the display form: sum of absolute values.
inline Tensor<float> reduce_channels_abs(const Tensor<float>& raw) {
  const std::size_t c = raw.extent(0), h = raw.extent(1), w = raw.extent(2);
  Tensor<float> out = Tensor<float>::zeros({h, w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < h * w; ++i) out[i] += std::fabs(raw[ch * h * w + i]);
  return out;
}

/// Reshape an input-shaped raw map to the canonical [C,H,W] layout; vector and
/// matrix inputs become single-channel rows.
inline Tensor<float> as_chw(const Tensor<float>& raw) {
  if (raw.rank() == 3) return raw;
  if (raw.rank() == 2) return raw.reshaped({1, raw.extent(0), raw.extent(1)});
  if (raw.rank() == 1) return raw.reshaped({1, 1, raw.extent(0)});
  raise(ErrorKind::shape_mismatch,
        "explanation raw map must have rank 1..3, got " + shape_to_string(raw.shape()));
}

namespace detail {

inline nlohmann::json method_params_json(Method method, const MethodParams& params,
                                         double resolved_sigma) {
  nlohmann::json j = nlohmann::json::object();
  switch (method) {
    case Method::smoothgrad:
      j["n_samples"] = params.sg_samples;
      j["sigma"] = resolved_sigma;
      j["seed"] = params.sg_seed;
      break;
    case Method::integrated_gradients:
      j["steps"] = params.ig_steps;
      j["baseline"] = params.ig_baseline;
      break;
    case Method::lrp_z:
      j["epsilon"] = 0.0;
      break;
    case Method::lrp_epsilon:
      j["epsilon"] = params.lrp_epsilon;
      break;
    case Method::deep_taylor:
      j["input_low"] = params.dtd_low;
      j["input_high"] = params.dtd_high;
      break;
    default:
      break;
  }
  return j;
}

}  // namespace detail

/// Run one method and package the result with its metadata.
template <typename Scalar>
ExplanationMap explain(const ModelGraph<Scalar>& model, const Tensor<Scalar>& x, std::size_t target,
                       Method method, const MethodParams& params = {}) {
  Tensor<Scalar> raw;
  double resolved_sigma = 0.0;
  switch (method) {
    case Method::saliency:
      raw = saliency_raw(model, x, target);
      break;
    case Method::gradient_input:
      raw = gradient_times_input_raw(model, x, target);
      break;
    case Method::guided_backprop:
      raw = guided_backprop_raw(model, x, target);
      break;
    case Method::smoothgrad: {
      std::optional<Scalar> sigma;
      if (params.sg_sigma.has_value()) sigma = static_cast<Scalar>(*params.sg_sigma);
      resolved_sigma = sigma.has_value()
                           ? static_cast<double>(*sigma)
                           : 0.15 * static_cast<double>(max_value(x) - min_value(x));
      raw = smoothgrad_raw(model, x, target, params.sg_samples, sigma, params.sg_seed);
      break;
    }
    case Method::integrated_gradients: {
      if (params.ig_baseline != "zeros")
        raise(ErrorKind::invalid_argument,
              "unknown baseline preset '" + params.ig_baseline + "' (built-in: zeros)");
      raw = integrated_gradients_raw(model, x, target, params.ig_steps);
      break;
    }
    case Method::deep_taylor:
      raw = deep_taylor_raw(model, x, target, static_cast<Scalar>(params.dtd_low),
                            static_cast<Scalar>(params.dtd_high));
      break;
    case Method::lrp_z:
      raw = lrp_raw(model, x, target, Scalar(0), params.lrp_batchnorm_linear);
      break;
    case Method::lrp_epsilon:
      raw = lrp_raw(model, x, target, static_cast<Scalar>(params.lrp_epsilon),
                    params.lrp_batchnorm_linear);
      break;
  }

  ExplanationMap map;
  map.raw = as_chw(raw.template cast<float>());
  map.reduced = reduce_channels_abs(map.raw);
  map.method = method_name(method);
  map.target_layer = model.prelogits_id;
  map.target = target;

  nlohmann::json meta;
  meta["method"] = map.method;
  meta["model_digest"] = model_digest(model);
  meta["params"] = detail::method_params_json(method, params, resolved_sigma);
  meta["target"] = target;
  meta["target_layer"] = map.target_layer;
  map.metadata_json = meta.dump();
  return map;
}

inline std::vector<std::uint8_t> save_explanation(const ExplanationMap& map) {
  if (map.raw.rank() != 3)
    raise(ErrorKind::shape_mismatch, "explanation raw map must be [C,H,W]");
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kExplanationMagic, kExplanationMagic + 4);
  out.push_back(kExplanationVersion);
  out.push_back(kExplanationDtypeF32);
  for (int axis = 0; axis < 3; ++axis)
    detail::put_u32(out, static_cast<std::uint32_t>(map.raw.extent(axis)));
  for (std::size_t i = 0; i < map.raw.size(); ++i) detail::put_f32(out, map.raw[i]);
  detail::put_u32(out, static_cast<std::uint32_t>(map.metadata_json.size()));
  out.insert(out.end(), map.metadata_json.begin(), map.metadata_json.end());
  return out;
}

inline ExplanationMap load_explanation(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes.data(), bytes.size());
  if (r.str(4) != std::string(kExplanationMagic, 4))
    raise(ErrorKind::format_error, "explanation file: bad magic (expected EXPL)");
  const std::uint8_t version = r.u8();
  if (version != kExplanationVersion)
    raise(ErrorKind::version_mismatch, "explanation file version " + std::to_string(version) +
                                           ", this build reads version " +
                                           std::to_string(kExplanationVersion));
  const std::uint8_t dtype = r.u8();
  if (dtype != kExplanationDtypeF32)
    raise(ErrorKind::format_error, "explanation file: unsupported dtype tag " + std::to_string(dtype));
  const std::size_t c = r.u32(), h = r.u32(), w = r.u32();
  ExplanationMap map;
  map.raw = Tensor<float>::zeros({c, h, w});
  for (std::size_t i = 0; i < map.raw.size(); ++i) map.raw[i] = r.f32();
  const std::uint32_t meta_len = r.u32();
  map.metadata_json = r.str(meta_len);
  if (!r.done()) raise(ErrorKind::format_error, "explanation file: trailing bytes");

  map.reduced = reduce_channels_abs(map.raw);
  try {
    const nlohmann::json meta = nlohmann::json::parse(map.metadata_json);
    map.method = meta.at("method").get<std::string>();
    map.target = meta.at("target").get<std::size_t>();
    map.target_layer = meta.value("target_layer", std::string());
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::format_error, std::string("explanation file metadata: ") + e.what());
  }
  return map;
}

inline void save_explanation_file(const ExplanationMap& map, const std::filesystem::path& path) {
  write_binary_file(path, save_explanation(map));
}

inline ExplanationMap load_explanation_file(const std::filesystem::path& path) {
  return load_explanation(read_binary_file(path));
}

}  // namespace attrikit
