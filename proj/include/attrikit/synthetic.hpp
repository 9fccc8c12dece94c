#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "attrikit/evalkit.hpp"
#include "attrikit/image.hpp"
#include "attrikit/rng.hpp"
#include "attrikit/tensor.hpp"

namespace attrikit {

enum class LesionPattern { localized_spots, diffuse_gradient, healthy };

inline const char* lesion_pattern_name(LesionPattern p) {
  switch (p) {
    case LesionPattern::localized_spots: return "localized_spots";
    case LesionPattern::diffuse_gradient: return "diffuse_gradient";
    case LesionPattern::healthy: return "healthy";
  }
  return "?";
}

struct SyntheticClassSpec {
  std::string name;
  LesionPattern pattern = LesionPattern::healthy;
  std::size_t spot_count_min = 3;
  std::size_t spot_count_max = 5;
  double spot_radius_min = 1.6;
  double spot_radius_max = 2.8;
};

struct SyntheticDatasetSpec {
  std::vector<SyntheticClassSpec> classes;
  std::size_t image_size = 32;
  std::size_t samples_per_class = 100;
  std::uint64_t seed = 0;

  /// Spots / diffuse / healthy, in that label order.
  static SyntheticDatasetSpec default_three_class() {
    SyntheticDatasetSpec spec;
    spec.classes = {
        {"localized_spots", LesionPattern::localized_spots, 3, 5, 1.6, 2.8},
        {"diffuse_gradient", LesionPattern::diffuse_gradient, 0, 0, 0.0, 0.0},
        {"healthy", LesionPattern::healthy, 0, 0, 0.0, 0.0},
    };
    return spec;
  }
};

/// One dataset element: RGB image in [0,1], class label, lesion mask
/// (all-zero for healthy images).
struct Sample {
  Tensor<float> image;            // [3,H,W]
  std::size_t label = 0;
  Tensor<std::uint8_t> mask;      // [H,W]
};

namespace detail {

struct LeafGeometry {
  double cx, cy;        // center
  double ax, ay;        // semi-axes
  double cos_t, sin_t;  // rotation

  bool contains(double x, double y, double scale = 1.0) const {
    const double dx = x - cx, dy = y - cy;
    const double u = (dx * cos_t + dy * sin_t) / (ax * scale);
    const double v = (-dx * sin_t + dy * cos_t) / (ay * scale);
    return u * u + v * v <= 1.0;
  }
};

inline float clamp01(double v) {
  return static_cast<float>(v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v));
}

}  // namespace detail

/// Draw one leaf image with the class's lesion pattern.  Purely a function of
/// the RNG stream state, so identical seeds reproduce identical samples.
inline Sample generate_sample(const SyntheticClassSpec& cls, std::size_t label,
                              std::size_t image_size, Rng& rng) {
  const std::size_t n = image_size;
  Sample sample;
  sample.label = label;
  sample.image = Tensor<float>::zeros({3, n, n});
  sample.mask = Tensor<std::uint8_t>::zeros({n, n});

  // leaf ellipse with jittered geometry
  detail::LeafGeometry leaf;
  leaf.cx = static_cast<double>(n) / 2.0 + rng.uniform(-1.5, 1.5);
  leaf.cy = static_cast<double>(n) / 2.0 + rng.uniform(-1.5, 1.5);
  leaf.ax = static_cast<double>(n) * rng.uniform(0.34, 0.42);
  leaf.ay = static_cast<double>(n) * rng.uniform(0.26, 0.33);
  const double theta = rng.uniform(0.0, 3.14159265358979323846);
  leaf.cos_t = std::cos(theta);
  leaf.sin_t = std::sin(theta);

  // per-image color jitter
  const double leaf_r = 0.16 + rng.uniform(-0.04, 0.04);
  const double leaf_g = 0.46 + rng.uniform(-0.06, 0.06);
  const double leaf_b = 0.13 + rng.uniform(-0.03, 0.03);
  const double soil_base = 0.07 + rng.uniform(0.0, 0.02);

  // diffuse ramp direction (drawn for every class to keep stream layout fixed)
  const double ramp_theta = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  const double ramp_x = std::cos(ramp_theta), ramp_y = std::sin(ramp_theta);

  // background + leaf body
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const double noise = rng.uniform(0.0, 0.035);
      const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
      if (leaf.contains(px, py)) {
        sample.image.at3(0, y, x) = detail::clamp01(leaf_r + noise);
        sample.image.at3(1, y, x) = detail::clamp01(leaf_g + noise * 1.5);
        sample.image.at3(2, y, x) = detail::clamp01(leaf_b + noise);
      } else {
        sample.image.at3(0, y, x) = detail::clamp01(soil_base + noise);
        sample.image.at3(1, y, x) = detail::clamp01(soil_base * 0.85 + noise);
        sample.image.at3(2, y, x) = detail::clamp01(soil_base * 0.7 + noise);
      }
    }
  }

  if (cls.pattern == LesionPattern::localized_spots) {
    const std::size_t count =
        cls.spot_count_min + rng.uniform_index(cls.spot_count_max - cls.spot_count_min + 1);
    std::vector<double> sx, sy, sr;
    std::size_t attempts = 0, consecutive_rejects = 0;
    while (sx.size() < count) {
      if (++attempts > 4000)
        raise(ErrorKind::invalid_geometry,
              "spot placement failed; class '" + cls.name + "' is over-constrained");
      if (consecutive_rejects > 150) {
        // greedy dead-end: early spots boxed out the rest; replay placement
        // from the current stream state (total attempt budget still applies)
        sx.clear();
        sy.clear();
        sr.clear();
        consecutive_rejects = 0;
      }
      const double r = rng.uniform(cls.spot_radius_min, cls.spot_radius_max);
      const double px = leaf.cx + rng.uniform(-leaf.ax, leaf.ax);
      const double py = leaf.cy + rng.uniform(-leaf.ay, leaf.ay);
      bool accepted = leaf.contains(px, py, 0.72);  // keep centers well inside the leaf
      for (std::size_t i = 0; accepted && i < sx.size(); ++i) {
        const double d = std::hypot(px - sx[i], py - sy[i]);
        if (d < r + sr[i] + 2.0) accepted = false;  // gap > sqrt(2) keeps components distinct
      }
      if (!accepted) {
        ++consecutive_rejects;
        continue;
      }
      consecutive_rejects = 0;
      sx.push_back(px);
      sy.push_back(py);
      sr.push_back(r);
    }
    // draw: rust-brown disks; mask covers exactly the drawn pixels
    for (std::size_t i = 0; i < sx.size(); ++i) {
      const std::size_t x0 = static_cast<std::size_t>(std::max(0.0, std::floor(sx[i] - sr[i] - 1)));
      const std::size_t y0 = static_cast<std::size_t>(std::max(0.0, std::floor(sy[i] - sr[i] - 1)));
      const std::size_t x1 = std::min(n - 1, static_cast<std::size_t>(std::ceil(sx[i] + sr[i] + 1)));
      const std::size_t y1 = std::min(n - 1, static_cast<std::size_t>(std::ceil(sy[i] + sr[i] + 1)));
      for (std::size_t y = y0; y <= y1; ++y)
        for (std::size_t x = x0; x <= x1; ++x) {
          const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
          const double d2 = (px - sx[i]) * (px - sx[i]) + (py - sy[i]) * (py - sy[i]);
          if (d2 > sr[i] * sr[i] || !leaf.contains(px, py)) continue;
          sample.image.at3(0, y, x) = detail::clamp01(0.62 + 0.05 * (1.0 - d2 / (sr[i] * sr[i])));
          sample.image.at3(1, y, x) = 0.32f;
          sample.image.at3(2, y, x) = 0.06f;
          sample.mask.at2(y, x) = 1;
        }
    }
  } else if (cls.pattern == LesionPattern::diffuse_gradient) {
    // yellowing ramp across the whole leaf; mask = strongly affected half
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
        if (!leaf.contains(px, py)) continue;
        const double along = ((px - leaf.cx) * ramp_x + (py - leaf.cy) * ramp_y) /
                             std::max(leaf.ax, leaf.ay);
        const double alpha = detail::clamp01(0.5 + 0.55 * along);  // 0..1 across the leaf
        const float r0 = sample.image.at3(0, y, x), g0 = sample.image.at3(1, y, x),
                    b0 = sample.image.at3(2, y, x);
        sample.image.at3(0, y, x) = detail::clamp01(r0 + alpha * (0.72 - r0));
        sample.image.at3(1, y, x) = detail::clamp01(g0 + alpha * (0.66 - g0));
        sample.image.at3(2, y, x) = detail::clamp01(b0 + alpha * (0.10 - b0));
        if (alpha > 0.5) sample.mask.at2(y, x) = 1;
      }
  }
  return sample;
}

/// Class-balanced deterministic dataset: samples_per_class images per class,
/// in class-major order.
inline std::vector<Sample> generate_synthetic(const SyntheticDatasetSpec& spec) {
  if (spec.classes.empty()) raise(ErrorKind::invalid_argument, "dataset spec has no classes");
  if (spec.image_size < 16)
    raise(ErrorKind::invalid_argument, "dataset image_size must be >= 16");
  for (const auto& cls : spec.classes)
    if (cls.pattern == LesionPattern::localized_spots && cls.spot_count_min > cls.spot_count_max)
      raise(ErrorKind::invalid_argument, "class '" + cls.name + "': bad spot count range");

  std::vector<Sample> dataset;
  dataset.reserve(spec.classes.size() * spec.samples_per_class);
  for (std::size_t label = 0; label < spec.classes.size(); ++label) {
    for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
      // one independent stream per sample: insensitive to generation order
      Rng rng(spec.seed);
      Rng sample_rng = rng.fork(label * 1000003 + i);
      dataset.push_back(generate_sample(spec.classes[label], label, spec.image_size, sample_rng));
    }
  }
  return dataset;
}

// --- manifest + on-disk dataset ---

/// Rows are "image_path,label[,mask_path]"; paths are relative to the
/// manifest's directory.  Healthy (empty-mask) rows omit the mask column.
inline void save_dataset(const std::vector<Sample>& dataset, const std::filesystem::path& dir,
                         const std::vector<std::string>& class_names = {}) {
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "masks");
  std::string manifest;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%05zu.png", i);
    const std::string image_rel = std::string("images/img_") + name;
    save_png(dir / image_rel, tensor_to_image(dataset[i].image));
    std::size_t mask_area = 0;
    for (std::size_t p = 0; p < dataset[i].mask.size(); ++p) mask_area += dataset[i].mask[p];
    manifest += image_rel + "," + std::to_string(dataset[i].label);
    if (mask_area > 0) {
      const std::string mask_rel = std::string("masks/mask_") + name;
      save_png(dir / mask_rel, mask_to_image(dataset[i].mask));
      manifest += "," + mask_rel;
    }
    manifest += "\n";
  }
  write_text_file(dir / "manifest.csv", manifest);
  if (!class_names.empty()) {
    std::string names;
    for (const auto& c : class_names) names += c + "\n";
    write_text_file(dir / "classes.txt", names);
  }
}

inline std::vector<Sample> load_manifest(const std::filesystem::path& manifest_path) {
  const std::string text = read_text_file(manifest_path);
  const std::filesystem::path base = manifest_path.parent_path();
  std::vector<Sample> dataset;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;

    std::vector<std::string> fields;
    std::size_t fs = 0;
    while (true) {
      const std::size_t fe = line.find(',', fs);
      if (fe == std::string::npos) {
        fields.push_back(line.substr(fs));
        break;
      }
      fields.push_back(line.substr(fs, fe - fs));
      fs = fe + 1;
    }
    if (fields.size() < 2 || fields.size() > 3)
      raise(ErrorKind::format_error,
            "manifest line " + std::to_string(line_no) + ": expected image,label[,mask]");

    Sample sample;
    const ImageU8 img = load_png(base / fields[0]);
    if (img.channels != 3)
      raise(ErrorKind::format_error, "manifest line " + std::to_string(line_no) +
                                         ": image must be RGB: " + fields[0]);
    sample.image = image_to_tensor(img);
    try {
      sample.label = static_cast<std::size_t>(std::stoul(fields[1]));
    } catch (const std::exception&) {
      raise(ErrorKind::format_error,
            "manifest line " + std::to_string(line_no) + ": bad label '" + fields[1] + "'");
    }
    if (fields.size() == 3 && !fields[2].empty()) {
      sample.mask = image_to_mask(load_png(base / fields[2]));
      if (sample.mask.shape() != std::vector<std::size_t>{img.height, img.width})
        raise(ErrorKind::shape_mismatch,
              "manifest line " + std::to_string(line_no) + ": mask/image size mismatch");
    } else {
      sample.mask = Tensor<std::uint8_t>::zeros({img.height, img.width});
    }
    dataset.push_back(std::move(sample));
  }
  return dataset;
}

/// 8-connected component count; the oracle for "each mask has 3..5 spots".
inline std::size_t connected_components(const Tensor<std::uint8_t>& mask) {
  const std::size_t h = mask.extent(0), w = mask.extent(1);
  std::vector<char> seen(h * w, 0);
  std::size_t components = 0;
  std::vector<std::size_t> stack;
  for (std::size_t startpx = 0; startpx < h * w; ++startpx) {
    if (!mask[startpx] || seen[startpx]) continue;
    ++components;
    stack.push_back(startpx);
    seen[startpx] = 1;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const std::size_t y = p / w, x = p % w;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dy == 0 && dx == 0) continue;
          const std::ptrdiff_t ny = static_cast<std::ptrdiff_t>(y) + dy;
          const std::ptrdiff_t nx = static_cast<std::ptrdiff_t>(x) + dx;
          if (ny < 0 || nx < 0 || ny >= static_cast<std::ptrdiff_t>(h) ||
              nx >= static_cast<std::ptrdiff_t>(w))
            continue;
          const std::size_t np = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
          if (mask[np] && !seen[np]) {
            seen[np] = 1;
            stack.push_back(np);
          }
        }
    }
  }
  return components;
}

}  // namespace attrikit
