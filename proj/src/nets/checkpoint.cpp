#include "repa/nets/checkpoint.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

#include "repa/errors.hpp"

namespace repa::nets {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path manifest_path(const fs::path& stem) { return fs::path(stem.string() + ".json"); }
fs::path sidecar_path(const fs::path& stem) { return fs::path(stem.string() + ".f32"); }

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const void* data, std::size_t size) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw ConfigError("write failed for " + path.string());
}

void put_f32(std::vector<unsigned char>& out, double v) {
  const float f = static_cast<float>(v);
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

double get_f32(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return static_cast<double>(f);
}

template <typename T>
T get_field(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("checkpoint config missing '") + key + "'");
  return j.at(key).get<T>();
}

}  // namespace

std::string sha256_hex(std::span<const unsigned char> bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw NumericalError("SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string s;
  for (unsigned int i = 0; i < len; ++i) {
    s.push_back(hex[md[i] >> 4]);
    s.push_back(hex[md[i] & 15]);
  }
  return s;
}

std::string sha256_hex(std::string_view text) {
  return sha256_hex(std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::string file_sha256(const fs::path& path) { return sha256_hex(read_bytes(path)); }

void save_parameters(const fs::path& stem, std::string_view kind, const json& config, const json& meta,
                     const ParameterSet& params) {
  std::vector<unsigned char> blob;
  blob.reserve(params.scalar_count() * 4);
  json arrays = json::array();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& v = params.value(i);
    for (double x : v.data()) put_f32(blob, x);
    arrays.push_back({{"name", params.name(i)}, {"shape", v.shape()}, {"offset", offset}});
    offset += v.size();
  }
  json manifest = {{"format", "repa-checkpoint"},
                   {"version", kCheckpointVersion},
                   {"kind", std::string(kind)},
                   {"config", config},
                   {"meta", meta.is_null() ? json::object() : meta},
                   {"sidecar", sidecar_path(stem).filename().string()},
                   {"sidecar_sha256", sha256_hex(blob)},
                   {"elements", offset},
                   {"parameters", arrays}};
  write_bytes(sidecar_path(stem), blob.data(), blob.size());
  const std::string text = manifest.dump(1) + "\n";
  write_bytes(manifest_path(stem), text.data(), text.size());
}

CheckpointInfo read_manifest(const fs::path& stem) {
  const auto bytes = read_bytes(manifest_path(stem));
  json m;
  try {
    m = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw ConfigError("checkpoint " + manifest_path(stem).string() + ": " + e.what());
  }
  if (m.value("format", "") != "repa-checkpoint") throw ConfigError("not a checkpoint manifest: " + stem.string());
  if (m.value("version", -1) != kCheckpointVersion) {
    throw ConfigError("checkpoint " + stem.string() + ": unsupported version " + m.value("version", json()).dump());
  }
  return {m.at("kind").get<std::string>(), m.at("config"), m.value("meta", json::object()), sha256_hex(bytes)};
}

CheckpointInfo load_parameters(const fs::path& stem, std::string_view kind, ParameterSet& params) {
  CheckpointInfo info = read_manifest(stem);
  if (info.kind != kind) throw ConfigError("checkpoint " + stem.string() + " holds '" + info.kind + "', expected '" +
                                           std::string(kind) + "'");
  const auto mbytes = read_bytes(manifest_path(stem));
  const json m = json::parse(mbytes.begin(), mbytes.end());
  const auto blob = read_bytes(sidecar_path(stem));
  if (sha256_hex(blob) != m.at("sidecar_sha256").get<std::string>()) {
    throw ConfigError("checkpoint " + stem.string() + ": sidecar hash mismatch");
  }
  const auto& arrays = m.at("parameters");
  if (arrays.size() != params.size()) throw ShapeError("checkpoint " + stem.string() + ": parameter count mismatch");
  const std::size_t total = m.at("elements").get<std::size_t>();
  if (blob.size() != 4 * total) throw ShapeError("checkpoint " + stem.string() + ": sidecar size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& a = arrays[i];
    const auto name = a.at("name").get<std::string>();
    const auto shape = a.at("shape").get<Shape>();
    const auto offset = a.at("offset").get<std::size_t>();
    Tensor& dst = params.value(i);
    if (name != params.name(i) || shape != dst.shape()) {
      throw ShapeError("checkpoint " + stem.string() + ": array '" + name + "' " + diffcore::shape_string(shape) +
                       " does not match '" + params.name(i) + "' " + diffcore::shape_string(dst.shape()));
    }
    if (offset + dst.size() > total) throw ShapeError("checkpoint " + stem.string() + ": array outside sidecar");
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = get_f32(blob.data() + 4 * (offset + k));
  }
  return info;
}

json to_json(const VelocityConfig& c) {
  return {{"height", c.height}, {"width", c.width},   {"patch", c.patch},   {"token_dim", c.token_dim},
          {"blocks", c.blocks}, {"tap", c.tap},       {"hidden", c.hidden}, {"time_features", c.time_features}};
}

json to_json(const HeadConfig& c) {
  return {{"input_dim", c.input_dim}, {"output_dim", c.output_dim}, {"hidden", c.hidden}, {"linear", c.linear}};
}

json to_json(const AutoencoderConfig& c) {
  return {{"height", c.height}, {"width", c.width}, {"hidden", c.hidden}, {"latent", c.latent}};
}

void save_model(const fs::path& stem, const VelocityModel& model, const json& meta) {
  save_parameters(stem, "velocity", to_json(model.config()), meta, model.params());
}

void save_model(const fs::path& stem, const ProjectionHead& head, const json& meta) {
  save_parameters(stem, "head", to_json(head.config()), meta, head.params());
}

void save_model(const fs::path& stem, const Autoencoder& ae, const json& meta) {
  json m = meta.is_null() ? json::object() : meta;
  m["trained"] = ae.trained();
  save_parameters(stem, "autoencoder", to_json(ae.config()), m, ae.params());
}

VelocityModel load_velocity(const fs::path& stem, CheckpointInfo* info) {
  const auto manifest = read_manifest(stem);
  const json& j = manifest.config;
  VelocityConfig c;
  c.height = get_field<std::size_t>(j, "height");
  c.width = get_field<std::size_t>(j, "width");
  c.patch = get_field<std::size_t>(j, "patch");
  c.token_dim = get_field<std::size_t>(j, "token_dim");
  c.blocks = get_field<std::size_t>(j, "blocks");
  c.tap = get_field<std::size_t>(j, "tap");
  c.hidden = get_field<std::size_t>(j, "hidden");
  c.time_features = get_field<std::size_t>(j, "time_features");
  VelocityModel model(c, 0);
  auto loaded = load_parameters(stem, "velocity", model.params());
  if (info) *info = loaded;
  return model;
}

ProjectionHead load_head(const fs::path& stem, CheckpointInfo* info) {
  const auto manifest = read_manifest(stem);
  const json& j = manifest.config;
  HeadConfig c;
  c.input_dim = get_field<std::size_t>(j, "input_dim");
  c.output_dim = get_field<std::size_t>(j, "output_dim");
  c.hidden = get_field<std::size_t>(j, "hidden");
  c.linear = get_field<bool>(j, "linear");
  ProjectionHead head(c, 0);
  auto loaded = load_parameters(stem, "head", head.params());
  if (info) *info = loaded;
  return head;
}

Autoencoder load_autoencoder(const fs::path& stem, CheckpointInfo* info) {
  const auto manifest = read_manifest(stem);
  const json& j = manifest.config;
  AutoencoderConfig c;
  c.height = get_field<std::size_t>(j, "height");
  c.width = get_field<std::size_t>(j, "width");
  c.hidden = get_field<std::size_t>(j, "hidden");
  c.latent = get_field<std::size_t>(j, "latent");
  Autoencoder ae(c, 0);
  auto loaded = load_parameters(stem, "autoencoder", ae.params());
  ae.set_trained(loaded.meta.value("trained", false));
  if (info) *info = loaded;
  return ae;
}

}  // namespace repa::nets
