#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "attrikit/tensor.hpp"

namespace attrikit {

enum class PoolKind { max, average };

/// Output spatial extent for a window sliding over a padded axis.
/// Throws invalid_geometry when the window does not fit.
inline std::size_t conv_output_extent(std::size_t in, std::size_t k, std::size_t stride,
                                      std::size_t padding, const char* op) {
  if (stride == 0) raise(ErrorKind::invalid_geometry, std::string(op) + ": stride must be positive");
  const std::size_t padded = in + 2 * padding;
  if (k == 0 || k > padded)
    raise(ErrorKind::invalid_geometry, std::string(op) + ": window " + std::to_string(k) +
                                           " exceeds padded extent " + std::to_string(padded));
  return (padded - k) / stride + 1;
}

/// Cross-correlation (no kernel flip). input [C_in,H,W], kernel
/// [C_out,C_in,kH,kW], bias [C_out]. Accumulation order is fixed:
/// bias, then c_in-major, kh, kw.
template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel,
                              const Tensor<Scalar>& bias, std::size_t stride,
                              std::size_t padding) {
  if (input.rank() != 3)
    raise(ErrorKind::shape_mismatch, "conv2d: input must be [C,H,W], got " + shape_to_string(input.shape()));
  if (kernel.rank() != 4)
    raise(ErrorKind::shape_mismatch, "conv2d: kernel must be [C_out,C_in,kH,kW], got " + shape_to_string(kernel.shape()));
  const std::size_t c_in = input.extent(0), h = input.extent(1), w = input.extent(2);
  const std::size_t c_out = kernel.extent(0), kh = kernel.extent(2), kw = kernel.extent(3);
  if (kernel.extent(1) != c_in)
    raise(ErrorKind::shape_mismatch, "conv2d: kernel expects " + std::to_string(kernel.extent(1)) +
                                         " input channels, input has " + std::to_string(c_in));
  if (bias.rank() != 1 || bias.extent(0) != c_out)
    raise(ErrorKind::shape_mismatch, "conv2d: bias must be [" + std::to_string(c_out) + "]");
  const std::size_t oh = conv_output_extent(h, kh, stride, padding, "conv2d");
  const std::size_t ow = conv_output_extent(w, kw, stride, padding, "conv2d");

  Tensor<Scalar> out = Tensor<Scalar>::zeros({c_out, oh, ow});
  for (std::size_t co = 0; co < c_out; ++co) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        Scalar acc = bias[co];
        for (std::size_t ci = 0; ci < c_in; ++ci) {
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * stride + ky) -
                                      static_cast<std::ptrdiff_t>(padding);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x * stride + kx) -
                                        static_cast<std::ptrdiff_t>(padding);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              acc += input.at3(ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) *
                     kernel[((co * c_in + ci) * kh + ky) * kw + kx];
            }
          }
        }
        out.at3(co, y, x) = acc;
      }
    }
  }
  return out;
}

/// Vector-Jacobian product of conv2d w.r.t. its input (transposed convolution).
template <typename Scalar>
Tensor<Scalar> conv2d_input_grad(const Tensor<Scalar>& out_grad, const Tensor<Scalar>& kernel,
                                 const std::vector<std::size_t>& input_shape, std::size_t stride,
                                 std::size_t padding) {
  const std::size_t c_in = input_shape[0], h = input_shape[1], w = input_shape[2];
  const std::size_t c_out = kernel.extent(0), kh = kernel.extent(2), kw = kernel.extent(3);
  const std::size_t oh = out_grad.extent(1), ow = out_grad.extent(2);
  Tensor<Scalar> grad = Tensor<Scalar>::zeros({c_in, h, w});
  for (std::size_t co = 0; co < c_out; ++co) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const Scalar g = out_grad.at3(co, y, x);
        if (g == Scalar(0)) continue;
        for (std::size_t ci = 0; ci < c_in; ++ci) {
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * stride + ky) -
                                      static_cast<std::ptrdiff_t>(padding);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x * stride + kx) -
                                        static_cast<std::ptrdiff_t>(padding);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              grad.at3(ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) +=
                  g * kernel[((co * c_in + ci) * kh + ky) * kw + kx];
            }
          }
        }
      }
    }
  }
  return grad;
}

template <typename Scalar>
Tensor<Scalar> conv2d_weight_grad(const Tensor<Scalar>& out_grad, const Tensor<Scalar>& input,
                                  const std::vector<std::size_t>& kernel_shape, std::size_t stride,
                                  std::size_t padding) {
  const std::size_t c_out = kernel_shape[0], c_in = kernel_shape[1];
  const std::size_t kh = kernel_shape[2], kw = kernel_shape[3];
  const std::size_t h = input.extent(1), w = input.extent(2);
  const std::size_t oh = out_grad.extent(1), ow = out_grad.extent(2);
  Tensor<Scalar> grad = Tensor<Scalar>::zeros({c_out, c_in, kh, kw});
  for (std::size_t co = 0; co < c_out; ++co) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const Scalar g = out_grad.at3(co, y, x);
        if (g == Scalar(0)) continue;
        for (std::size_t ci = 0; ci < c_in; ++ci) {
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * stride + ky) -
                                      static_cast<std::ptrdiff_t>(padding);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x * stride + kx) -
                                        static_cast<std::ptrdiff_t>(padding);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              grad[((co * c_in + ci) * kh + ky) * kw + kx] +=
                  g * input.at3(ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
            }
          }
        }
      }
    }
  }
  return grad;
}

template <typename Scalar>
Tensor<Scalar> conv2d_bias_grad(const Tensor<Scalar>& out_grad) {
  const std::size_t c_out = out_grad.extent(0);
  Tensor<Scalar> grad = Tensor<Scalar>::zeros({c_out});
  for (std::size_t co = 0; co < c_out; ++co) {
    Scalar acc = 0;
    for (std::size_t y = 0; y < out_grad.extent(1); ++y)
      for (std::size_t x = 0; x < out_grad.extent(2); ++x) acc += out_grad.at3(co, y, x);
    grad[co] = acc;
  }
  return grad;
}

/// weight [m,n] * input [n] + bias [m].
template <typename Scalar>
Tensor<Scalar> dense_forward(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                             const Tensor<Scalar>& bias) {
  if (input.rank() != 1)
    raise(ErrorKind::shape_mismatch, "dense: input must be rank 1, got " + shape_to_string(input.shape()));
  if (weight.rank() != 2 || weight.extent(1) != input.extent(0))
    raise(ErrorKind::shape_mismatch, "dense: weight " + shape_to_string(weight.shape()) +
                                         " does not accept input " + shape_to_string(input.shape()));
  const std::size_t m = weight.extent(0), n = weight.extent(1);
  if (bias.rank() != 1 || bias.extent(0) != m)
    raise(ErrorKind::shape_mismatch, "dense: bias must be [" + std::to_string(m) + "]");
  Tensor<Scalar> out = Tensor<Scalar>::zeros({m});
  for (std::size_t i = 0; i < m; ++i) {
    Scalar acc = bias[i];
    for (std::size_t j = 0; j < n; ++j) acc += weight.at2(i, j) * input[j];
    out[i] = acc;
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> dense_input_grad(const Tensor<Scalar>& out_grad, const Tensor<Scalar>& weight) {
  const std::size_t m = weight.extent(0), n = weight.extent(1);
  Tensor<Scalar> grad = Tensor<Scalar>::zeros({n});
  for (std::size_t j = 0; j < n; ++j) {
    Scalar acc = 0;
    for (std::size_t i = 0; i < m; ++i) acc += weight.at2(i, j) * out_grad[i];
    grad[j] = acc;
  }
  return grad;
}

template <typename Scalar>
Tensor<Scalar> dense_weight_grad(const Tensor<Scalar>& out_grad, const Tensor<Scalar>& input) {
  const std::size_t m = out_grad.extent(0), n = input.extent(0);
  Tensor<Scalar> grad = Tensor<Scalar>::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) grad.at2(i, j) = out_grad[i] * input[j];
  return grad;
}

template <typename Scalar>
struct PoolResult {
  Tensor<Scalar> output;
  /// For max pooling: flat index into the input of the selected element,
  /// one per output element (first occurrence on ties). Empty for average.
  std::vector<std::size_t> argmax;
};

template <typename Scalar>
PoolResult<Scalar> pool_forward(const Tensor<Scalar>& input, PoolKind kind, std::size_t window,
                                std::size_t stride) {
  if (input.rank() != 3)
    raise(ErrorKind::shape_mismatch, "pool: input must be [C,H,W], got " + shape_to_string(input.shape()));
  const std::size_t c = input.extent(0), h = input.extent(1), w = input.extent(2);
  if (window == 0 || window > h || window > w)
    raise(ErrorKind::invalid_geometry, "pool: window " + std::to_string(window) +
                                           " does not fit input " + shape_to_string(input.shape()));
  const std::size_t oh = conv_output_extent(h, window, stride, 0, "pool");
  const std::size_t ow = conv_output_extent(w, window, stride, 0, "pool");

  PoolResult<Scalar> result;
  result.output = Tensor<Scalar>::zeros({c, oh, ow});
  if (kind == PoolKind::max) result.argmax.resize(c * oh * ow);

  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        if (kind == PoolKind::max) {
          std::size_t best = (ch * h + y * stride) * w + x * stride;
          Scalar best_v = input[best];
          for (std::size_t dy = 0; dy < window; ++dy) {
            for (std::size_t dx = 0; dx < window; ++dx) {
              const std::size_t idx = (ch * h + y * stride + dy) * w + x * stride + dx;
              if (input[idx] > best_v) {
                best_v = input[idx];
                best = idx;
              }
            }
          }
          result.output.at3(ch, y, x) = best_v;
          result.argmax[(ch * oh + y) * ow + x] = best;
        } else {
          Scalar acc = 0;
          for (std::size_t dy = 0; dy < window; ++dy)
            for (std::size_t dx = 0; dx < window; ++dx)
              acc += input.at3(ch, y * stride + dy, x * stride + dx);
          result.output.at3(ch, y, x) = acc / static_cast<Scalar>(window * window);
        }
      }
    }
  }
  return result;
}

template <typename Scalar>
Tensor<Scalar> maxpool_backward(const Tensor<Scalar>& out_grad, const std::vector<std::size_t>& argmax,
                                const std::vector<std::size_t>& input_shape) {
  Tensor<Scalar> grad = Tensor<Scalar>::zeros(input_shape);
  for (std::size_t i = 0; i < out_grad.size(); ++i) grad[argmax[i]] += out_grad[i];
  return grad;
}

template <typename Scalar>
Tensor<Scalar> avgpool_backward(const Tensor<Scalar>& out_grad, std::size_t window, std::size_t stride,
                                const std::vector<std::size_t>& input_shape) {
  const std::size_t h = input_shape[1], w = input_shape[2];
  const std::size_t oh = out_grad.extent(1), ow = out_grad.extent(2);
  const Scalar inv = Scalar(1) / static_cast<Scalar>(window * window);
  Tensor<Scalar> grad = Tensor<Scalar>::zeros(input_shape);
  for (std::size_t ch = 0; ch < out_grad.extent(0); ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        const Scalar g = out_grad.at3(ch, y, x) * inv;
        for (std::size_t dy = 0; dy < window; ++dy)
          for (std::size_t dx = 0; dx < window; ++dx)
            grad[(ch * h + y * stride + dy) * w + x * stride + dx] += g;
      }
  return grad;
}

/// [C,H,W] -> [C] spatial mean.
template <typename Scalar>
Tensor<Scalar> global_avgpool_forward(const Tensor<Scalar>& input) {
  if (input.rank() != 3)
    raise(ErrorKind::shape_mismatch, "globalavgpool: input must be [C,H,W]");
  const std::size_t c = input.extent(0), hw = input.extent(1) * input.extent(2);
  Tensor<Scalar> out = Tensor<Scalar>::zeros({c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    Scalar acc = 0;
    for (std::size_t i = 0; i < hw; ++i) acc += input[ch * hw + i];
    out[ch] = acc / static_cast<Scalar>(hw);
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> global_avgpool_backward(const Tensor<Scalar>& out_grad,
                                       const std::vector<std::size_t>& input_shape) {
  const std::size_t hw = input_shape[1] * input_shape[2];
  const Scalar inv = Scalar(1) / static_cast<Scalar>(hw);
  Tensor<Scalar> grad = Tensor<Scalar>::zeros(input_shape);
  for (std::size_t ch = 0; ch < input_shape[0]; ++ch)
    for (std::size_t i = 0; i < hw; ++i) grad[ch * hw + i] = out_grad[ch] * inv;
  return grad;
}

template <typename Scalar>
Tensor<Scalar> relu_forward(const Tensor<Scalar>& input) {
  return map(input, [](Scalar v) { return v > Scalar(0) ? v : Scalar(0); });
}

/// 1 where the unit was active, 0 elsewhere.
template <typename Scalar>
Tensor<Scalar> relu_mask(const Tensor<Scalar>& input) {
  return map(input, [](Scalar v) { return v > Scalar(0) ? Scalar(1) : Scalar(0); });
}

/// Numerically stable softmax over a rank-1 tensor.
template <typename Scalar>
Tensor<Scalar> softmax_forward(const Tensor<Scalar>& logits) {
  if (logits.rank() != 1)
    raise(ErrorKind::shape_mismatch, "softmax: input must be rank 1");
  const Scalar m = max_value(logits);
  Tensor<Scalar> out = Tensor<Scalar>::zeros(logits.shape());
  Scalar denom = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    denom += out[i];
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= denom;
  return out;
}

/// vJp of softmax: s .* (g - <g,s>).
template <typename Scalar>
Tensor<Scalar> softmax_backward(const Tensor<Scalar>& out_grad, const Tensor<Scalar>& softmax_out) {
  Scalar dot = 0;
  for (std::size_t i = 0; i < out_grad.size(); ++i) dot += out_grad[i] * softmax_out[i];
  Tensor<Scalar> grad = Tensor<Scalar>::zeros(out_grad.shape());
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = softmax_out[i] * (out_grad[i] - dot);
  return grad;
}

/// Concatenate along the leading (channel) axis; all non-leading extents
/// must agree. Rank-1 tensors concatenate end to end.
template <typename Scalar>
Tensor<Scalar> concat_leading(const std::vector<Tensor<Scalar>>& parts) {
  if (parts.size() < 2)
    raise(ErrorKind::shape_mismatch, "concat: needs at least 2 inputs");
  const std::size_t rank = parts[0].rank();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != rank)
      raise(ErrorKind::shape_mismatch, "concat: mixed ranks");
    for (std::size_t axis = 1; axis < rank; ++axis)
      if (p.extent(axis) != parts[0].extent(axis))
        raise(ErrorKind::shape_mismatch, "concat: non-channel extents disagree: " +
                                             shape_to_string(p.shape()) + " vs " +
                                             shape_to_string(parts[0].shape()));
    total += p.extent(0);
  }
  std::vector<std::size_t> shape = parts[0].shape();
  shape[0] = total;
  Tensor<Scalar> out = Tensor<Scalar>::zeros(shape);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < p.size(); ++i) out[offset + i] = p[i];
    offset += p.size();
  }
  return out;
}

/// Split a tensor produced by concat_leading back into per-source slices.
template <typename Scalar>
std::vector<Tensor<Scalar>> split_leading(const Tensor<Scalar>& whole,
                                          const std::vector<std::vector<std::size_t>>& part_shapes) {
  std::vector<Tensor<Scalar>> parts;
  std::size_t offset = 0;
  for (const auto& shape : part_shapes) {
    Tensor<Scalar> p = Tensor<Scalar>::zeros(shape);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = whole[offset + i];
    offset += p.size();
    parts.push_back(std::move(p));
  }
  return parts;
}

}  // namespace attrikit
