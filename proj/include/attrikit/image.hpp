#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <zlib.h>

#include "attrikit/error.hpp"
#include "attrikit/model_io.hpp"
#include "attrikit/tensor.hpp"

namespace attrikit {

/// 8-bit interleaved raster, row-major; channels is 1 (gray) or 3 (RGB).
struct ImageU8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;

  static ImageU8 blank(std::size_t width, std::size_t height, std::size_t channels,
                       std::uint8_t fill = 0) {
    ImageU8 img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.pixels.assign(width * height * channels, fill);
    return img;
  }

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) {
    return pixels[(y * width + x) * channels + c];
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels[(y * width + x) * channels + c];
  }
};

// --- PNG codec (8-bit gray / RGB, non-interlaced) ---

namespace detail {

inline void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_png_chunk(std::vector<std::uint8_t>& out, const char type[4],
                          const std::vector<std::uint8_t>& data) {
  put_u32_be(out, static_cast<std::uint32_t>(data.size()));
  std::vector<std::uint8_t> body(type, type + 4);
  body.insert(body.end(), data.begin(), data.end());
  const auto crc = crc32(0L, body.data(), static_cast<uInt>(body.size()));
  out.insert(out.end(), body.begin(), body.end());
  put_u32_be(out, static_cast<std::uint32_t>(crc));
}

inline std::uint8_t paeth_predict(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
  if (pb <= pc) return static_cast<std::uint8_t>(b);
  return static_cast<std::uint8_t>(c);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_png(const ImageU8& img) {
  if (img.channels != 1 && img.channels != 3)
    raise(ErrorKind::invalid_argument, "png encoder handles 1 or 3 channels");
  if (img.width == 0 || img.height == 0 ||
      img.pixels.size() != img.width * img.height * img.channels)
    raise(ErrorKind::invalid_argument, "png encoder: inconsistent image buffer");

  static const std::uint8_t signature[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  std::vector<std::uint8_t> out(signature, signature + 8);

  std::vector<std::uint8_t> ihdr;
  detail::put_u32_be(ihdr, static_cast<std::uint32_t>(img.width));
  detail::put_u32_be(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);                                             // bit depth
  ihdr.push_back(img.channels == 1 ? 0 : 2);                     // gray / truecolor
  ihdr.push_back(0);                                             // compression
  ihdr.push_back(0);                                             // filter method
  ihdr.push_back(0);                                             // no interlace
  detail::put_png_chunk(out, "IHDR", ihdr);

  // filter type 0 on every scanline keeps the byte stream trivially reproducible
  const std::size_t row_bytes = img.width * img.channels;
  std::vector<std::uint8_t> raw;
  raw.reserve(img.height * (row_bytes + 1));
  for (std::size_t y = 0; y < img.height; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), img.pixels.begin() + static_cast<std::ptrdiff_t>(y * row_bytes),
               img.pixels.begin() + static_cast<std::ptrdiff_t>((y + 1) * row_bytes));
  }
  uLongf compressed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(compressed_size);
  if (compress2(compressed.data(), &compressed_size, raw.data(), static_cast<uLong>(raw.size()),
                9) != Z_OK)
    raise(ErrorKind::io_error, "png encoder: deflate failed");
  compressed.resize(compressed_size);
  detail::put_png_chunk(out, "IDAT", compressed);
  detail::put_png_chunk(out, "IEND", {});
  return out;
}

inline ImageU8 decode_png(const std::vector<std::uint8_t>& bytes) {
  static const std::uint8_t signature[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  if (bytes.size() < 8 || std::memcmp(bytes.data(), signature, 8) != 0)
    raise(ErrorKind::format_error, "png: bad signature");

  const auto read_u32_be = [&](std::size_t pos) -> std::uint32_t {
    return (static_cast<std::uint32_t>(bytes[pos]) << 24) |
           (static_cast<std::uint32_t>(bytes[pos + 1]) << 16) |
           (static_cast<std::uint32_t>(bytes[pos + 2]) << 8) |
           static_cast<std::uint32_t>(bytes[pos + 3]);
  };

  ImageU8 img;
  std::vector<std::uint8_t> idat;
  bool have_header = false;
  std::size_t pos = 8;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t length = read_u32_be(pos);
    const std::string type(reinterpret_cast<const char*>(bytes.data() + pos + 4), 4);
    const std::size_t data_at = pos + 8;
    if (data_at + length + 4 > bytes.size())
      raise(ErrorKind::format_error, "png: truncated chunk '" + type + "'");
    if (type == "IHDR") {
      img.width = read_u32_be(data_at);
      img.height = read_u32_be(data_at + 4);
      const std::uint8_t depth = bytes[data_at + 8];
      const std::uint8_t color = bytes[data_at + 9];
      const std::uint8_t interlace = bytes[data_at + 12];
      if (depth != 8 || (color != 0 && color != 2) || interlace != 0)
        raise(ErrorKind::format_error,
              "png: unsupported format (need 8-bit gray or RGB, non-interlaced)");
      img.channels = color == 0 ? 1 : 3;
      have_header = true;
    } else if (type == "IDAT") {
      idat.insert(idat.end(), bytes.begin() + static_cast<std::ptrdiff_t>(data_at),
                  bytes.begin() + static_cast<std::ptrdiff_t>(data_at + length));
    } else if (type == "IEND") {
      break;
    }
    pos = data_at + length + 4;  // skip data and CRC
  }
  if (!have_header || idat.empty()) raise(ErrorKind::format_error, "png: missing IHDR or IDAT");

  const std::size_t row_bytes = img.width * img.channels;
  const std::size_t raw_size = img.height * (row_bytes + 1);
  std::vector<std::uint8_t> raw(raw_size);
  uLongf raw_len = static_cast<uLongf>(raw_size);
  if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw_size)
    raise(ErrorKind::format_error, "png: inflate failed or size mismatch");

  img.pixels.assign(img.width * img.height * img.channels, 0);
  const std::size_t bpp = img.channels;
  for (std::size_t y = 0; y < img.height; ++y) {
    const std::uint8_t filter = raw[y * (row_bytes + 1)];
    const std::uint8_t* src = raw.data() + y * (row_bytes + 1) + 1;
    std::uint8_t* dst = img.pixels.data() + y * row_bytes;
    const std::uint8_t* above = y > 0 ? img.pixels.data() + (y - 1) * row_bytes : nullptr;
    for (std::size_t i = 0; i < row_bytes; ++i) {
      const int a = i >= bpp ? dst[i - bpp] : 0;
      const int b = above ? above[i] : 0;
      const int c = (above && i >= bpp) ? above[i - bpp] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += detail::paeth_predict(a, b, c); break;
        default: raise(ErrorKind::format_error, "png: unknown filter type");
      }
      dst[i] = static_cast<std::uint8_t>(v & 0xff);
    }
  }
  return img;
}

inline void save_png(const std::filesystem::path& path, const ImageU8& img) {
  write_binary_file(path, encode_png(img));
}

inline ImageU8 load_png(const std::filesystem::path& path) {
  return decode_png(read_binary_file(path));
}

// --- tensor <-> raster conversions ---

/// [3,H,W] or [1,H,W] values in [0,1] -> 8-bit raster (round, clamp).
inline ImageU8 tensor_to_image(const Tensor<float>& t) {
  if (t.rank() != 3 || (t.extent(0) != 1 && t.extent(0) != 3))
    raise(ErrorKind::shape_mismatch, "tensor_to_image expects [1|3,H,W], got " +
                                         shape_to_string(t.shape()));
  const std::size_t c = t.extent(0), h = t.extent(1), w = t.extent(2);
  ImageU8 img = ImageU8::blank(w, h, c);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const float v = t.at3(ch, y, x);
        const float clamped = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        img.at(x, y, ch) = static_cast<std::uint8_t>(std::lround(clamped * 255.0f));
      }
  return img;
}

/// 8-bit raster -> [C,H,W] floats in [0,1] (divide by 255).
inline Tensor<float> image_to_tensor(const ImageU8& img) {
  Tensor<float> t = Tensor<float>::zeros({img.channels, img.height, img.width});
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x)
        t.at3(c, y, x) = static_cast<float>(img.at(x, y, c)) / 255.0f;
  return t;
}

/// Binary [H,W] mask -> gray raster with 0/255 values.
inline ImageU8 mask_to_image(const Tensor<std::uint8_t>& mask) {
  if (mask.rank() != 2)
    raise(ErrorKind::shape_mismatch, "mask_to_image expects [H,W]");
  ImageU8 img = ImageU8::blank(mask.extent(1), mask.extent(0), 1);
  for (std::size_t i = 0; i < mask.size(); ++i)
    img.pixels[i] = mask[i] ? 255 : 0;
  return img;
}

/// Gray raster -> binary [H,W] mask (threshold at 128).
inline Tensor<std::uint8_t> image_to_mask(const ImageU8& img) {
  if (img.channels != 1) raise(ErrorKind::format_error, "mask image must be grayscale");
  Tensor<std::uint8_t> mask = Tensor<std::uint8_t>::zeros({img.height, img.width});
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = img.pixels[i] >= 128 ? 1 : 0;
  return mask;
}

// --- rendering primitives ---

enum class Colormap { grayscale, red_blue };

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

/// red_blue is diverging: 0 -> blue, 0.5 -> white, 1 -> pure red.
inline Rgb colormap_lookup(Colormap map, float v) {
  const auto lerp = [](std::uint8_t lo, std::uint8_t hi, float t) {
    return static_cast<std::uint8_t>(std::lround(static_cast<float>(lo) +
                                                 (static_cast<float>(hi) - static_cast<float>(lo)) * t));
  };
  if (map == Colormap::grayscale) {
    const std::uint8_t g = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    return {g, g, g};
  }
  if (v <= 0.5f) {
    const float t = v / 0.5f;
    return {lerp(0, 255, t), lerp(0, 255, t), 255};
  }
  const float t = (v - 0.5f) / 0.5f;
  return {255, lerp(255, 0, t), lerp(255, 0, t)};
}

/// Pixels of the mask adjacent (4-neighborhood) to non-mask territory.
inline Tensor<std::uint8_t> mask_boundary(const Tensor<std::uint8_t>& mask) {
  if (mask.rank() != 2) raise(ErrorKind::shape_mismatch, "mask_boundary expects [H,W]");
  const std::size_t h = mask.extent(0), w = mask.extent(1);
  Tensor<std::uint8_t> edge = Tensor<std::uint8_t>::zeros({h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      if (!mask.at2(y, x)) continue;
      const bool open = y == 0 || x == 0 || y == h - 1 || x == w - 1 || !mask.at2(y - 1, x) ||
                        !mask.at2(y + 1, x) || !mask.at2(y, x - 1) || !mask.at2(y, x + 1);
      if (open) edge.at2(y, x) = 1;
    }
  return edge;
}

/// Normalized [H,W] scores in [0,1] -> RGB rendering; optional underlying
/// image blended beneath, optional mask contour drawn in white on top.
inline ImageU8 render_heatmap(const Tensor<float>& normalized, Colormap map,
                              const ImageU8* underlay = nullptr,
                              const Tensor<std::uint8_t>* edge_mask = nullptr) {
  if (normalized.rank() != 2)
    raise(ErrorKind::shape_mismatch, "render_heatmap expects [H,W] scores");
  const std::size_t h = normalized.extent(0), w = normalized.extent(1);
  for (std::size_t i = 0; i < normalized.size(); ++i)
    if (!(normalized[i] >= 0.0f && normalized[i] <= 1.0f))
      raise(ErrorKind::invalid_argument, "render_heatmap: values must lie in [0,1]");
  if (underlay && (underlay->width != w || underlay->height != h))
    raise(ErrorKind::shape_mismatch, "render_heatmap: underlay size mismatch");
  if (edge_mask && (edge_mask->rank() != 2 || edge_mask->extent(0) != h || edge_mask->extent(1) != w))
    raise(ErrorKind::shape_mismatch, "render_heatmap: edge mask size mismatch");

  ImageU8 out = ImageU8::blank(w, h, 3);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      Rgb c = colormap_lookup(map, normalized.at2(y, x));
      if (underlay) {
        const auto blend = [&](std::uint8_t heat, std::size_t ch) {
          const std::uint8_t base = underlay->channels == 3 ? underlay->at(x, y, ch)
                                                            : underlay->at(x, y, 0);
          return static_cast<std::uint8_t>(std::lround(0.6f * heat + 0.4f * base));
        };
        c = {blend(c.r, 0), blend(c.g, 1), blend(c.b, 2)};
      }
      out.at(x, y, 0) = c.r;
      out.at(x, y, 1) = c.g;
      out.at(x, y, 2) = c.b;
    }
  if (edge_mask) {
    const Tensor<std::uint8_t> edge = mask_boundary(*edge_mask);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        if (edge.at2(y, x)) {
          out.at(x, y, 0) = 255;
          out.at(x, y, 1) = 255;
          out.at(x, y, 2) = 255;
        }
  }
  return out;
}

/// Integer nearest-neighbor upscale (for legible small rasters).
inline ImageU8 scale_nearest(const ImageU8& img, std::size_t factor) {
  if (factor == 0) raise(ErrorKind::invalid_argument, "scale factor must be >= 1");
  ImageU8 out = ImageU8::blank(img.width * factor, img.height * factor, img.channels);
  for (std::size_t y = 0; y < out.height; ++y)
    for (std::size_t x = 0; x < out.width; ++x)
      for (std::size_t c = 0; c < img.channels; ++c)
        out.at(x, y, c) = img.at(x / factor, y / factor, c);
  return out;
}

/// Horizontal strip of same-height RGB tiles with a thin white gutter.
inline ImageU8 render_panel(const std::vector<ImageU8>& tiles, std::size_t gutter = 2) {
  if (tiles.empty()) raise(ErrorKind::invalid_argument, "render_panel: no tiles");
  const std::size_t h = tiles[0].height;
  std::size_t total_w = 0;
  for (const auto& t : tiles) {
    if (t.height != h) raise(ErrorKind::shape_mismatch, "render_panel: tile heights differ");
    total_w += t.width;
  }
  total_w += gutter * (tiles.size() - 1);
  ImageU8 out = ImageU8::blank(total_w, h, 3, 255);
  std::size_t x0 = 0;
  for (const auto& t : tiles) {
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < t.width; ++x)
        for (std::size_t c = 0; c < 3; ++c)
          out.at(x0 + x, y, c) = t.channels == 3 ? t.at(x, y, c) : t.at(x, y, 0);
    x0 += t.width + gutter;
  }
  return out;
}

// --- 5x7 bitmap glyphs for numeric annotations ---

namespace detail {

inline const std::uint8_t* glyph_rows(char ch) {
  // each row is 5 bits, MSB = leftmost column
  static const std::uint8_t digits[12][7] = {
      {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e},  // 0
      {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e},  // 1
      {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f},  // 2
      {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e},  // 3
      {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02},  // 4
      {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e},  // 5
      {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e},  // 6
      {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
      {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e},  // 8
      {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c},  // 9
      {0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c},  // .
      {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03},  // %
  };
  if (ch >= '0' && ch <= '9') return digits[ch - '0'];
  if (ch == '.') return digits[10];
  if (ch == '%') return digits[11];
  return nullptr;  // unsupported characters render as blanks
}

}  // namespace detail

/// Draw numeric text (digits, '.', '%') at (x, y) top-left; 6px advance.
inline void draw_text(ImageU8& img, std::size_t x, std::size_t y, const std::string& text,
                      Rgb color) {
  std::size_t cx = x;
  for (char ch : text) {
    const std::uint8_t* rows = detail::glyph_rows(ch);
    if (rows) {
      for (std::size_t ry = 0; ry < 7; ++ry)
        for (std::size_t rx = 0; rx < 5; ++rx) {
          if (!(rows[ry] & (1u << (4 - rx)))) continue;
          const std::size_t px = cx + rx, py = y + ry;
          if (px >= img.width || py >= img.height) continue;
          img.at(px, py, 0) = color.r;
          if (img.channels == 3) {
            img.at(px, py, 1) = color.g;
            img.at(px, py, 2) = color.b;
          }
        }
    }
    cx += 6;
  }
}

/// Width in pixels draw_text will cover.
inline std::size_t text_width(const std::string& text) {
  return text.empty() ? 0 : text.size() * 6 - 1;
}

}  // namespace attrikit
