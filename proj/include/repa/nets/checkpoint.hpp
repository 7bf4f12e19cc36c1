#pragma once
// Checkpoints: <stem>.json manifest (format version, kind, config, named
// arrays with shapes) plus <stem>.f32, the arrays as little-endian float32 in
// manifest order. Loading validates version, kind, names, shapes, sidecar
// size and the sidecar's SHA-256.

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "repa/nets/autoencoder.hpp"
#include "repa/nets/projection_head.hpp"
#include "repa/nets/velocity_model.hpp"

namespace repa::nets {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointInfo {
  std::string kind;
  nlohmann::json config;
  nlohmann::json meta;
  std::string hash;  // SHA-256 of the manifest bytes (which pin the sidecar hash)
};

std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_hex(std::string_view text);
std::string file_sha256(const std::filesystem::path& path);

void save_parameters(const std::filesystem::path& stem, std::string_view kind, const nlohmann::json& config,
                     const nlohmann::json& meta, const ParameterSet& params);
CheckpointInfo read_manifest(const std::filesystem::path& stem);
// Fills `params` (whose names and shapes must match) from disk.
CheckpointInfo load_parameters(const std::filesystem::path& stem, std::string_view kind, ParameterSet& params);

nlohmann::json to_json(const VelocityConfig& c);
nlohmann::json to_json(const HeadConfig& c);
nlohmann::json to_json(const AutoencoderConfig& c);

void save_model(const std::filesystem::path& stem, const VelocityModel& model, const nlohmann::json& meta = {});
void save_model(const std::filesystem::path& stem, const ProjectionHead& head, const nlohmann::json& meta = {});
void save_model(const std::filesystem::path& stem, const Autoencoder& ae, const nlohmann::json& meta = {});

VelocityModel load_velocity(const std::filesystem::path& stem, CheckpointInfo* info = nullptr);
ProjectionHead load_head(const std::filesystem::path& stem, CheckpointInfo* info = nullptr);
Autoencoder load_autoencoder(const std::filesystem::path& stem, CheckpointInfo* info = nullptr);

}  // namespace repa::nets
