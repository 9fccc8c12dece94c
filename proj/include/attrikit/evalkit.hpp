#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "attrikit/attribution.hpp"
#include "attrikit/image.hpp"
#include "attrikit/tensor.hpp"

namespace attrikit {

/// Binary lesion/region-of-interest annotation over the image plane.
struct AnnotationMask {
  Tensor<std::uint8_t> grid;  // [H,W], 0/1
  std::string provenance = "synthetic";

  std::size_t area() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) n += grid[i] ? 1 : 0;
    return n;
  }
  bool empty() const { return area() == 0; }
  double area_fraction() const {
    return grid.size() == 0 ? 0.0 : static_cast<double>(area()) / static_cast<double>(grid.size());
  }
};

// --- normalization ---

enum class NormMode { abs_minmax, signed_minmax };

inline NormMode norm_mode_from_name(const std::string& name) {
  if (name == "abs_minmax") return NormMode::abs_minmax;
  if (name == "signed_minmax") return NormMode::signed_minmax;
  raise(ErrorKind::invalid_argument,
        "unknown norm mode '" + name + "' (expected abs_minmax or signed_minmax)");
}

/// Channel-reduce then min-max rescale into [0,1]; a constant reduced map
/// normalizes to all zeros.
inline Tensor<float> normalize_map(const ExplanationMap& map, NormMode mode = NormMode::abs_minmax) {
  map.raw.validate_finite("explanation raw scores");
  const std::size_t c = map.raw.extent(0), h = map.raw.extent(1), w = map.raw.extent(2);
  Tensor<float> reduced = Tensor<float>::zeros({h, w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < h * w; ++i)
      reduced[i] += mode == NormMode::abs_minmax ? std::fabs(map.raw[ch * h * w + i])
                                                 : map.raw[ch * h * w + i];
  const float lo = min_value(reduced), hi = max_value(reduced);
  if (hi == lo) return Tensor<float>::zeros({h, w});
  for (std::size_t i = 0; i < reduced.size(); ++i) reduced[i] = (reduced[i] - lo) / (hi - lo);
  return reduced;
}

// --- localization ---

namespace detail {

inline void require_mask_shape(const Tensor<float>& normalized, const AnnotationMask& mask,
                               const char* what) {
  if (normalized.shape() != mask.grid.shape())
    raise(ErrorKind::shape_mismatch, std::string(what) + ": map " +
                                         shape_to_string(normalized.shape()) + " vs mask " +
                                         shape_to_string(mask.grid.shape()));
}

}  // namespace detail

/// Fraction of total map mass falling inside the mask.
inline double mass_in_mask(const Tensor<float>& normalized, const AnnotationMask& mask) {
  detail::require_mask_shape(normalized, mask, "mass_in_mask");
  if (mask.empty())
    raise(ErrorKind::undefined_metric,
          "mass_in_mask is undefined for an empty mask (healthy images are excluded)");
  double inside = 0.0, total = 0.0;
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    total += normalized[i];
    if (mask.grid[i]) inside += normalized[i];
  }
  if (total <= 0.0)
    raise(ErrorKind::undefined_metric, "mass_in_mask is undefined for a zero-mass map");
  return inside / total;
}

namespace detail {

/// Indices of the k largest values; ties resolved toward the lowest index.
inline std::vector<std::size_t> topk_indices(const Tensor<float>& values, std::size_t k) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;
  });
  order.resize(k);
  return order;
}

}  // namespace detail

/// Fraction of the k highest-scoring pixels that land inside the mask.
inline double topk_in_mask(const Tensor<float>& normalized, const AnnotationMask& mask,
                           std::size_t k) {
  detail::require_mask_shape(normalized, mask, "topk_in_mask");
  if (mask.empty())
    raise(ErrorKind::undefined_metric,
          "topk_in_mask is undefined for an empty mask (healthy images are excluded)");
  if (k == 0 || k > normalized.size())
    raise(ErrorKind::invalid_argument, "topk_in_mask: k must be in [1, H*W]");
  const auto top = detail::topk_indices(normalized, k);
  std::size_t hits = 0;
  for (std::size_t idx : top) hits += mask.grid[idx] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(k);
}

// --- agreement ---

namespace detail {

/// Ranks with ties averaged (fractional ranks), 1-based.
inline std::vector<double> average_ranks(const Tensor<float>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size(), 0.0);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

/// Spearman rank correlation over pixels, in [-1, 1].
inline double spearman(const Tensor<float>& a, const Tensor<float>& b) {
  require_same_shape(a, b, "agreement maps");
  if (a.size() < 2) raise(ErrorKind::undefined_metric, "spearman needs at least 2 pixels");
  const auto ra = detail::average_ranks(a);
  const auto rb = detail::average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - mean, db = rb[i] - mean;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0)
    raise(ErrorKind::undefined_metric, "spearman is undefined for a constant map");
  return cov / std::sqrt(var_a * var_b);
}

/// Jaccard overlap of the two maps' top-k pixel sets.
inline double topk_iou(const Tensor<float>& a, const Tensor<float>& b, std::size_t k) {
  require_same_shape(a, b, "agreement maps");
  if (k == 0 || k > a.size()) raise(ErrorKind::invalid_argument, "topk_iou: k must be in [1, H*W]");
  const auto ta = detail::topk_indices(a, k);
  const auto tb = detail::topk_indices(b, k);
  std::vector<bool> in_a(a.size(), false);
  for (std::size_t idx : ta) in_a[idx] = true;
  std::size_t inter = 0;
  for (std::size_t idx : tb) inter += in_a[idx] ? 1 : 0;
  const std::size_t uni = 2 * k - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// --- confusion matrix ---

struct ConfusionMatrix {
  std::vector<std::vector<std::size_t>> counts;      // rows = true class
  std::vector<std::vector<double>> row_normalized;   // rows sum to 1 (or all zero)

  std::size_t classes() const { return counts.size(); }
  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& row : counts)
      for (std::size_t v : row) n += v;
    return n;
  }
  double accuracy() const {
    const std::size_t n = total();
    if (n == 0) return 0.0;
    std::size_t diag = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) diag += counts[i][i];
    return static_cast<double>(diag) / static_cast<double>(n);
  }
};

inline ConfusionMatrix confusion_matrix(const std::vector<std::size_t>& labels,
                                        const std::vector<std::size_t>& predictions,
                                        std::size_t num_classes) {
  if (labels.size() != predictions.size())
    raise(ErrorKind::invalid_argument, "confusion_matrix: label/prediction count mismatch");
  ConfusionMatrix cm;
  cm.counts.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes || predictions[i] >= num_classes)
      raise(ErrorKind::invalid_argument, "confusion_matrix: class id out of range at row " +
                                             std::to_string(i));
    cm.counts[labels[i]][predictions[i]]++;
  }
  cm.row_normalized.assign(num_classes, std::vector<double>(num_classes, 0.0));
  for (std::size_t i = 0; i < num_classes; ++i) {
    std::size_t row_total = 0;
    for (std::size_t v : cm.counts[i]) row_total += v;
    if (row_total == 0) continue;
    for (std::size_t j = 0; j < num_classes; ++j)
      cm.row_normalized[i][j] = static_cast<double>(cm.counts[i][j]) / static_cast<double>(row_total);
  }
  return cm;
}

/// Fixed-point percentage with two decimals, e.g. 0.157894 -> "15.79".
inline std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
  return buf;
}

/// Grid rendering with row-normalized percentages in each cell.
inline ImageU8 render_confusion(const ConfusionMatrix& cm) {
  const std::size_t c = cm.classes();
  if (c == 0) raise(ErrorKind::invalid_argument, "render_confusion: empty matrix");
  const std::size_t cell_w = 48, cell_h = 32;
  ImageU8 img = ImageU8::blank(c * cell_w + 1, c * cell_h + 1, 3, 255);

  const auto lerp = [](std::uint8_t lo, std::uint8_t hi, double t) {
    return static_cast<std::uint8_t>(std::lround(lo + (static_cast<double>(hi) - lo) * t));
  };
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double v = cm.row_normalized[i][j];
      const Rgb bg = {lerp(255, 25, v), lerp(255, 70, v), lerp(255, 160, v)};
      for (std::size_t y = 0; y < cell_h - 1; ++y)
        for (std::size_t x = 0; x < cell_w - 1; ++x) {
          img.at(j * cell_w + 1 + x, i * cell_h + 1 + y, 0) = bg.r;
          img.at(j * cell_w + 1 + x, i * cell_h + 1 + y, 1) = bg.g;
          img.at(j * cell_w + 1 + x, i * cell_h + 1 + y, 2) = bg.b;
        }
      const std::string text = format_percent(v);
      const Rgb fg = v > 0.5 ? Rgb{255, 255, 255} : Rgb{0, 0, 0};
      const std::size_t tw = text_width(text);
      const std::size_t tx = j * cell_w + (cell_w - std::min(tw, cell_w)) / 2;
      const std::size_t ty = i * cell_h + (cell_h - 7) / 2;
      draw_text(img, tx, ty, text, fg);
    }
  }
  // grid lines
  for (std::size_t i = 0; i <= c; ++i) {
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t ch = 0; ch < 3; ++ch) img.at(x, i * cell_h, ch) = 60;
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t ch = 0; ch < 3; ++ch) img.at(i * cell_w, y, ch) = 60;
  }
  return img;
}

/// Delimited text form: one row per true class, tab-separated percentages.
inline std::string confusion_to_text(const ConfusionMatrix& cm) {
  std::string out = "true\\pred";
  for (std::size_t j = 0; j < cm.classes(); ++j) out += "\t" + std::to_string(j);
  out += "\n";
  for (std::size_t i = 0; i < cm.classes(); ++i) {
    out += std::to_string(i);
    for (std::size_t j = 0; j < cm.classes(); ++j) out += "\t" + format_percent(cm.row_normalized[i][j]);
    out += "\n";
  }
  return out;
}

}  // namespace attrikit
