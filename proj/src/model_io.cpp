// Copyright 2026 The ibdpsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "ibdpsc/model_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "ibdpsc/errors.hpp"

namespace ibdpsc {

namespace {

using nlohmann::json;

constexpr std::size_t kMagicLen = 8;
constexpr const char* kConvention = "cross-correlation";

void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_u64(std::vector<char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

void put_floats(std::vector<char>& out, std::span<const float> values) {
  for (float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

// Splits a container into its JSON manifest and the payload that follows.
std::pair<json, std::span<const char>> split_container(const std::vector<char>& bytes, const char* magic) {
  if (bytes.size() < kMagicLen || std::memcmp(bytes.data(), magic, kMagicLen) != 0) {
    throw FormatError(fmt::format("magic mismatch: expected \"{}\"", magic));
  }
  if (bytes.size() < kMagicLen + 8) throw FormatError("truncated header: missing manifest length");
  const std::uint64_t len = get_u64(bytes.data() + kMagicLen);
  const std::size_t start = kMagicLen + 8;
  if (len > bytes.size() - start) {
    throw FormatError(fmt::format("manifest length {} exceeds file size", len));
  }
  json manifest;
  try {
    manifest = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                           bytes.begin() + static_cast<std::ptrdiff_t>(start + len));
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
  }
  return {std::move(manifest), std::span<const char>(bytes).subspan(start + len)};
}

std::vector<char> assemble(const char* magic, const json& manifest, const std::vector<char>& payload) {
  const std::string text = manifest.dump();
  std::vector<char> out(magic, magic + kMagicLen);
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

// ---- model encoding -------------------------------------------------------

class BlobWriter {
 public:
  json add(std::span<const float> values) {
    json ref = {{"offset", floats_}, {"count", values.size()}};
    put_floats(bytes_, values);
    floats_ += values.size();
    return ref;
  }
  std::size_t floats() const { return floats_; }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
  std::size_t floats_ = 0;
};

json encode_layers(const std::vector<Layer>& layers, BlobWriter& blob);

json encode_layer(const Layer& layer, BlobWriter& blob) {
  json j = {{"kind", layer_kind_name(layer.op)}, {"name", layer.name}};
  if (const auto* l = std::get_if<Conv2dLayer>(&layer.op)) {
    j["in_channels"] = l->weight.dim(1);
    j["out_channels"] = l->weight.dim(0);
    j["kernel"] = {l->weight.dim(2), l->weight.dim(3)};
    j["stride"] = l->stride;
    j["padding"] = l->padding;
    j["weight"] = blob.add(l->weight.values());
    if (!l->bias.empty()) j["bias"] = blob.add(l->bias);
  } else if (const auto* l = std::get_if<BatchNormLayer>(&layer.op)) {
    j["channels"] = l->params.channels();
    j["epsilon"] = static_cast<double>(l->params.epsilon);
    j["gamma"] = blob.add(l->params.gamma);
    j["beta"] = blob.add(l->params.beta);
    j["running_mean"] = blob.add(l->params.running_mean);
    j["running_var"] = blob.add(l->params.running_var);
  } else if (const auto* l = std::get_if<MaxPoolLayer>(&layer.op)) {
    j["kernel"] = l->kernel;
    j["stride"] = l->stride;
  } else if (const auto* l = std::get_if<LinearLayer>(&layer.op)) {
    j["in_features"] = l->weight.dim(1);
    j["out_features"] = l->weight.dim(0);
    j["weight"] = blob.add(l->weight.values());
    if (!l->bias.empty()) j["bias"] = blob.add(l->bias);
  } else if (const auto* l = std::get_if<ResidualLayer>(&layer.op)) {
    j["skip"] = encode_layers(l->skip, blob);
    j["main"] = encode_layers(l->main, blob);
  }
  return j;
}

json encode_layers(const std::vector<Layer>& layers, BlobWriter& blob) {
  json arr = json::array();
  for (const auto& layer : layers) arr.push_back(encode_layer(layer, blob));
  return arr;
}

// ---- model decoding -------------------------------------------------------

class LayerDecoder {
 public:
  LayerDecoder(std::span<const char> blob) : blob_(blob), available_(blob.size() / 4) {}

  std::vector<Layer> decode_sequence(const json& arr, std::size_t top) {
    if (!arr.is_array()) fail(top, "layer list must be an array");
    std::vector<Layer> layers;
    for (const auto& j : arr) layers.push_back(decode_layer(j, top));
    return layers;
  }

  Layer decode_layer(const json& j, std::size_t top) {
    try {
      return decode_layer_unchecked(j, top);
    } catch (const json::exception& e) {
      fail(top, std::string("malformed layer entry: ") + e.what());
    }
  }

  std::size_t max_end() const { return max_end_; }

 private:
  [[noreturn]] static void fail(std::size_t top, const std::string& message) {
    throw LayerError(LayerError::Kind::format, top, message);
  }

  std::vector<float> read(const json& ref, std::size_t expected, std::size_t top, const char* what) {
    const std::size_t offset = ref.at("offset").get<std::size_t>();
    const std::size_t count = ref.at("count").get<std::size_t>();
    if (count != expected) {
      fail(top, fmt::format("manifest/blob length disagreement: {} declares {} floats, shape needs {}", what,
                            count, expected));
    }
    if (offset > available_ || count > available_ - offset) {
      throw LayerError(LayerError::Kind::format, top,
                       fmt::format("blob underrun at layer {}: {} needs floats [{}, {}) but blob holds {}", top, what,
                                   offset, offset + count, available_));
    }
    std::vector<float> values(count);
    const char* base = blob_.data() + offset * 4;
    for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<float>(get_u32(base + 4 * i));
    max_end_ = std::max(max_end_, offset + count);
    return values;
  }

  Layer decode_layer_unchecked(const json& j, std::size_t top) {
    Layer layer;
    const std::string kind = j.at("kind").get<std::string>();
    layer.name = j.value("name", std::string());
    if (kind == "conv2d") {
      Conv2dLayer l;
      const auto cin = j.at("in_channels").get<std::size_t>();
      const auto cout = j.at("out_channels").get<std::size_t>();
      const auto kernel = j.at("kernel").get<std::vector<std::size_t>>();
      if (kernel.size() != 2 || cin == 0 || cout == 0 || kernel[0] == 0 || kernel[1] == 0) {
        fail(top, "conv2d needs positive channels and a 2-element kernel");
      }
      l.stride = j.at("stride").get<std::size_t>();
      l.padding = j.at("padding").get<std::size_t>();
      Shape shape{cout, cin, kernel[0], kernel[1]};
      l.weight = Tensor(shape, read(j.at("weight"), shape_volume(shape), top, "conv2d weight"));
      if (j.contains("bias")) l.bias = read(j.at("bias"), cout, top, "conv2d bias");
      layer.op = std::move(l);
    } else if (kind == "batchnorm") {
      BatchNormLayer l;
      const auto c = j.at("channels").get<std::size_t>();
      l.params.epsilon = static_cast<float>(j.at("epsilon").get<double>());
      l.params.gamma = read(j.at("gamma"), c, top, "batchnorm gamma");
      l.params.beta = read(j.at("beta"), c, top, "batchnorm beta");
      l.params.running_mean = read(j.at("running_mean"), c, top, "batchnorm running_mean");
      l.params.running_var = read(j.at("running_var"), c, top, "batchnorm running_var");
      layer.op = std::move(l);
    } else if (kind == "relu") {
      layer.op = ReluLayer{};
    } else if (kind == "maxpool2d") {
      layer.op = MaxPoolLayer{j.at("kernel").get<std::size_t>(), j.at("stride").get<std::size_t>()};
    } else if (kind == "global_avgpool") {
      layer.op = GlobalAvgPoolLayer{};
    } else if (kind == "linear") {
      LinearLayer l;
      const auto d = j.at("in_features").get<std::size_t>();
      const auto k = j.at("out_features").get<std::size_t>();
      if (d == 0 || k == 0) fail(top, "linear needs positive feature counts");
      l.weight = Tensor({k, d}, read(j.at("weight"), k * d, top, "linear weight"));
      if (j.contains("bias")) l.bias = read(j.at("bias"), k, top, "linear bias");
      layer.op = std::move(l);
    } else if (kind == "residual") {
      ResidualLayer l;
      l.skip = decode_sequence(j.at("skip"), top);
      l.main = decode_sequence(j.at("main"), top);
      layer.op = std::move(l);
    } else {
      fail(top, fmt::format("unsupported layer kind '{}'", kind));
    }
    return layer;
  }

  std::span<const char> blob_;
  std::size_t available_;
  std::size_t max_end_ = 0;
};

}  // namespace

std::vector<char> encode_model(const ModelGraph& graph) {
  BlobWriter blob;
  json manifest;
  manifest["format"] = "IBDM";
  manifest["version"] = 1;
  manifest["convolution"] = kConvention;
  manifest["class_count"] = graph.class_count();
  manifest["input_shape"] = graph.input_shape();
  manifest["layers"] = encode_layers(graph.layers(), blob);
  manifest["blob_floats"] = blob.floats();
  return assemble(kModelMagic, manifest, blob.bytes());
}

ModelGraph decode_model(const std::vector<char>& bytes) {
  auto [manifest, blob] = split_container(bytes, kModelMagic);
  std::size_t declared = 0;
  std::size_t class_count = 0;
  Shape input_shape;
  try {
    if (manifest.value("convolution", std::string()) != kConvention) {
      throw FormatError(fmt::format("unsupported convolution convention '{}' (expected '{}')",
                                    manifest.value("convolution", std::string()), kConvention));
    }
    declared = manifest.at("blob_floats").get<std::size_t>();
    class_count = manifest.at("class_count").get<std::size_t>();
    input_shape = manifest.at("input_shape").get<Shape>();
    if (!manifest.at("layers").is_array()) throw FormatError("manifest 'layers' must be an array");
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model manifest: ") + e.what());
  }
  if (blob.size() % 4 != 0) throw FormatError("blob length is not a whole number of float32 values");

  LayerDecoder decoder(blob);
  std::vector<Layer> layers;
  const json& arr = manifest.at("layers");
  for (std::size_t i = 0; i < arr.size(); ++i) layers.push_back(decoder.decode_layer(arr[i], i));

  if (declared != blob.size() / 4 || decoder.max_end() > declared) {
    throw FormatError(fmt::format("manifest/blob length disagreement: manifest declares {} floats, blob holds {}",
                                  declared, blob.size() / 4));
  }
  return ModelGraph(std::move(layers), class_count, std::move(input_shape));
}

void save_model(const ModelGraph& graph, const std::filesystem::path& path) {
  write_file(path, encode_model(graph));
}

ModelGraph load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

// ---- datasets -------------------------------------------------------------

void LabeledSet::validate() const {
  if (images.rank() != 4) throw FormatError("dataset images must be [N,C,H,W]");
  if (images.dim(0) != labels.size()) {
    throw FormatError(fmt::format("dataset has {} images but {} labels", images.dim(0), labels.size()));
  }
  if (class_count == 0) throw FormatError("dataset class_count must be positive");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= class_count) {
      throw FormatError(fmt::format("sample {}: label {} out of range [0, {})", i, labels[i], class_count));
    }
  }
  if (poison_flags && poison_flags->size() != labels.size()) {
    throw FormatError("poison flag count does not match sample count");
  }
}

LabeledSet LabeledSet::subset(const std::vector<std::size_t>& indices) const {
  if (indices.empty()) throw ConfigError("subset: no indices");
  LabeledSet out;
  out.class_count = class_count;
  const std::size_t row = images.size() / images.dim(0);
  Shape shape = images.shape();
  shape[0] = indices.size();
  std::vector<float> data;
  data.reserve(row * indices.size());
  if (poison_flags) out.poison_flags.emplace();
  for (auto i : indices) {
    if (i >= size()) throw ConfigError(fmt::format("subset index {} out of range", i));
    data.insert(data.end(), images.values().begin() + static_cast<std::ptrdiff_t>(i * row),
                images.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * row));
    out.labels.push_back(labels[i]);
    if (poison_flags) out.poison_flags->push_back((*poison_flags)[i]);
  }
  out.images = Tensor(std::move(shape), std::move(data));
  return out;
}

std::vector<char> encode_dataset(const LabeledSet& set) {
  set.validate();
  json manifest;
  manifest["format"] = "IBDS";
  manifest["version"] = 1;
  manifest["count"] = set.size();
  manifest["image_shape"] = Shape(set.images.shape().begin() + 1, set.images.shape().end());
  manifest["class_count"] = set.class_count;
  manifest["has_flags"] = set.has_flags();
  manifest["image_floats"] = set.images.size();

  std::vector<char> payload;
  payload.reserve(set.images.size() * 4 + set.size() * 5);
  put_floats(payload, set.images.values());
  for (auto label : set.labels) put_u32(payload, label);
  if (set.poison_flags) {
    for (bool f : *set.poison_flags) payload.push_back(f ? 1 : 0);
  }
  return assemble(kDatasetMagic, manifest, payload);
}

LabeledSet decode_dataset(const std::vector<char>& bytes) {
  auto [manifest, payload] = split_container(bytes, kDatasetMagic);
  LabeledSet set;
  std::size_t count = 0, floats = 0;
  Shape image_shape;
  bool has_flags = false;
  try {
    count = manifest.at("count").get<std::size_t>();
    image_shape = manifest.at("image_shape").get<Shape>();
    set.class_count = manifest.at("class_count").get<std::size_t>();
    has_flags = manifest.at("has_flags").get<bool>();
    floats = manifest.at("image_floats").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed dataset manifest: ") + e.what());
  }
  if (count == 0 || image_shape.size() != 3 || floats != count * shape_volume(image_shape)) {
    throw FormatError("dataset manifest: count, image_shape and image_floats disagree");
  }
  const std::size_t expected = floats * 4 + count * 4 + (has_flags ? count : 0);
  if (payload.size() != expected) {
    throw FormatError(fmt::format("dataset payload length disagreement: manifest implies {} bytes, file holds {}",
                                  expected, payload.size()));
  }
  std::vector<float> data(floats);
  for (std::size_t i = 0; i < floats; ++i) data[i] = std::bit_cast<float>(get_u32(payload.data() + 4 * i));
  const char* labels = payload.data() + floats * 4;
  set.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) set.labels[i] = get_u32(labels + 4 * i);
  if (has_flags) {
    const char* flags = labels + count * 4;
    std::vector<bool> f(count);
    for (std::size_t i = 0; i < count; ++i) {
      if (flags[i] != 0 && flags[i] != 1) throw FormatError(fmt::format("sample {}: poison flag must be 0 or 1", i));
      f[i] = flags[i] == 1;
    }
    set.poison_flags = std::move(f);
  }
  Shape shape{count, image_shape[0], image_shape[1], image_shape[2]};
  set.images = Tensor(std::move(shape), std::move(data));
  set.validate();
  return set;
}

void save_dataset(const LabeledSet& set, const std::filesystem::path& path) {
  write_file(path, encode_dataset(set));
}

LabeledSet load_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

// ---- files ----------------------------------------------------------------

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(fmt::format("read error on '{}'", path.string()));
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("write error on '{}'", path.string()));
}

std::string sha256_hex(const std::vector<char>& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 digest failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

}  // namespace ibdpsc
