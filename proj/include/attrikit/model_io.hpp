#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "attrikit/graph.hpp"

namespace attrikit {

inline constexpr int kModelFormatVersion = 1;
inline constexpr char kWeightsMagic[4] = {'N', 'N', 'W', 'T'};

// --- small binary helpers (explicit little-endian) ---

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    const std::uint8_t* p = take(2);
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t u32() {
    const std::uint8_t* p = take(4);
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str(std::size_t n) {
    const std::uint8_t* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  bool done() const { return pos_ == size_; }

 private:
  const std::uint8_t* take(std::size_t n) {
    if (pos_ + n > size_) raise(ErrorKind::format_error, "weights blob truncated");
    const std::uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string fnv1a_hex(const std::uint8_t* data, std::size_t size,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ull;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

// --- model document (JSON) ---

template <typename Scalar>
std::string save_model_document(const ModelGraph<Scalar>& model) {
  nlohmann::json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["input_shape"] = model.input_shape;
  doc["output_id"] = model.output_id;
  doc["prelogits_id"] = model.prelogits_id;
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& node : model.nodes) {
    nlohmann::json n;
    n["id"] = node.id;
    n["op"] = op_kind_name(node.op);
    n["inputs"] = node.inputs;
    nlohmann::json params = nlohmann::json::object();
    switch (node.op) {
      case OpKind::conv2d:
        params["stride"] = node.stride;
        params["padding"] = node.padding;
        break;
      case OpKind::maxpool:
      case OpKind::avgpool:
        params["window"] = node.window;
        params["stride"] = node.stride;
        break;
      case OpKind::concat:
        params["axis"] = node.axis;
        break;
      default:
        break;
    }
    n["params"] = params;
    n["weights"] = weight_slots(node.op);
    nodes.push_back(std::move(n));
  }
  doc["nodes"] = std::move(nodes);
  return doc.dump(2) + "\n";
}

// --- weights blob ---

template <typename Scalar>
std::vector<std::uint8_t> save_weights_blob(const ModelGraph<Scalar>& model) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kWeightsMagic, kWeightsMagic + 4);
  std::uint32_t entries = 0;
  for (const auto& node : model.nodes) entries += static_cast<std::uint32_t>(weight_slots(node.op).size());
  detail::put_u32(out, entries);
  for (const auto& node : model.nodes) {
    for (const std::string& slot : weight_slots(node.op)) {
      const Tensor<Scalar>& t = node.weight(slot);
      const std::string name = node.id + "." + slot;
      if (name.size() > 0xffff)
        raise(ErrorKind::format_error, "weight name too long: " + name);
      detail::put_u16(out, static_cast<std::uint16_t>(name.size()));
      out.insert(out.end(), name.begin(), name.end());
      out.push_back(static_cast<std::uint8_t>(t.rank()));
      for (std::size_t e : t.shape()) detail::put_u32(out, static_cast<std::uint32_t>(e));
      for (std::size_t i = 0; i < t.size(); ++i)
        detail::put_f32(out, static_cast<float>(t[i]));
    }
  }
  return out;
}

inline std::map<std::string, Tensor<float>> parse_weights_blob(const std::vector<std::uint8_t>& blob) {
  detail::ByteReader r(blob.data(), blob.size());
  if (r.str(4) != std::string(kWeightsMagic, 4))
    raise(ErrorKind::format_error, "weights blob: bad magic (expected NNWT)");
  const std::uint32_t entries = r.u32();
  std::map<std::string, Tensor<float>> weights;
  for (std::uint32_t e = 0; e < entries; ++e) {
    const std::uint16_t name_len = r.u16();
    const std::string name = r.str(name_len);
    const std::uint8_t rank = r.u8();
    std::vector<std::size_t> shape;
    std::size_t count = 1;
    for (std::uint8_t i = 0; i < rank; ++i) {
      shape.push_back(r.u32());
      count *= shape.back();
    }
    Tensor<float> t = Tensor<float>::zeros(shape);
    for (std::size_t i = 0; i < count; ++i) t[i] = r.f32();
    if (!weights.emplace(name, std::move(t)).second)
      raise(ErrorKind::format_error, "weights blob: duplicate entry '" + name + "'");
  }
  if (!r.done()) raise(ErrorKind::format_error, "weights blob: trailing bytes");
  return weights;
}

// --- loading ---

inline ModelGraph<float> load_model(const std::string& document_text,
                                    const std::vector<std::uint8_t>& weights_blob) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document_text);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::format_error, std::string("model document: ") + e.what());
  }

  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion)
      raise(ErrorKind::version_mismatch, "model document format_version " + std::to_string(version) +
                                             ", this build reads version " +
                                             std::to_string(kModelFormatVersion));

    ModelGraph<float> model;
    model.input_shape = doc.at("input_shape").get<std::vector<std::size_t>>();
    model.output_id = doc.at("output_id").get<std::string>();
    model.prelogits_id = doc.at("prelogits_id").get<std::string>();

    std::vector<LayerNode<float>> pending;
    for (const auto& n : doc.at("nodes")) {
      LayerNode<float> node;
      node.id = n.at("id").get<std::string>();
      node.op = op_kind_from_name(n.at("op").get<std::string>());
      node.inputs = n.at("inputs").get<std::vector<std::string>>();
      if (n.contains("params")) {
        const auto& params = n.at("params");
        if (params.contains("stride")) node.stride = params.at("stride").get<std::size_t>();
        if (params.contains("padding")) node.padding = params.at("padding").get<std::size_t>();
        if (params.contains("window")) node.window = params.at("window").get<std::size_t>();
        if (params.contains("axis")) node.axis = params.at("axis").get<std::size_t>();
      }
      pending.push_back(std::move(node));
    }

    // Stable topological sort; document order is kept among ready nodes, so
    // a document saved by save_model_document() loads in identical order.
    std::set<std::string> placed{kInputId};
    std::vector<bool> done(pending.size(), false);
    for (std::size_t placed_count = 0; placed_count < pending.size();) {
      bool progress = false;
      for (std::size_t i = 0; i < pending.size(); ++i) {
        if (done[i]) continue;
        bool ready = true;
        for (const auto& src : pending[i].inputs)
          if (!placed.count(src)) {
            ready = false;
            break;
          }
        if (!ready) continue;
        placed.insert(pending[i].id);
        model.nodes.push_back(std::move(pending[i]));
        done[i] = true;
        ++placed_count;
        progress = true;
      }
      if (!progress) {
        std::string stuck;
        for (std::size_t i = 0; i < pending.size(); ++i)
          if (!done[i]) stuck += (stuck.empty() ? "" : ", ") + pending[i].id;
        raise(ErrorKind::cyclic_graph, "cycle or dangling input among nodes: " + stuck);
      }
    }

    auto weights = parse_weights_blob(weights_blob);
    for (auto& node : model.nodes) {
      for (const std::string& slot : weight_slots(node.op)) {
        const std::string name = node.id + "." + slot;
        auto it = weights.find(name);
        if (it == weights.end())
          raise(ErrorKind::missing_weight,
                "weight '" + name + "' for node '" + node.id + "' is absent from the blob");
        node.weights[slot] = std::move(it->second);
        weights.erase(it);
      }
    }
    if (!weights.empty())
      raise(ErrorKind::format_error,
            "weights blob has entries not declared by the model document, first: '" +
                weights.begin()->first + "'");

    validate_model(model);
    return model;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::format_error, std::string("model document: ") + e.what());
  }
}

/// Digest over the serialized document and blob; identifies a model in
/// explanation-file metadata.
template <typename Scalar>
std::string model_digest(const ModelGraph<Scalar>& model) {
  const std::string doc = save_model_document(model);
  const std::vector<std::uint8_t> blob = save_weights_blob(model);
  const std::string doc_hash = fnv1a_hex(reinterpret_cast<const std::uint8_t*>(doc.data()), doc.size());
  return fnv1a_hex(blob.data(), blob.size(),
                   std::stoull(doc_hash.substr(0, 16), nullptr, 16));
}

// --- file helpers ---

inline std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::io_error, "cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) raise(ErrorKind::io_error, "read failed for '" + path.string() + "'");
  return bytes;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_binary_file(path);
  return std::string(bytes.begin(), bytes.end());
}

inline void write_binary_file(const std::filesystem::path& path, const std::uint8_t* data,
                              std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::io_error, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) raise(ErrorKind::io_error, "write failed for '" + path.string() + "'");
}

inline void write_binary_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  write_binary_file(path, bytes.data(), bytes.size());
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_binary_file(path, reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
}

template <typename Scalar>
void save_model_files(const ModelGraph<Scalar>& model, const std::filesystem::path& document_path,
                      const std::filesystem::path& weights_path) {
  write_text_file(document_path, save_model_document(model));
  write_binary_file(weights_path, save_weights_blob(model));
}

inline ModelGraph<float> load_model_files(const std::filesystem::path& document_path,
                                          const std::filesystem::path& weights_path) {
  return load_model(read_text_file(document_path), read_binary_file(weights_path));
}

}  // namespace attrikit
