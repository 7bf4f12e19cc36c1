#include "repa/harness/hashing.hpp"

#include <span>

#include "repa/nets/checkpoint.hpp"

namespace repa::harness {

std::string config_hash(const ExperimentConfig& config) { return nets::sha256_hex(canonical_config(config)); }

std::string tensor_hash(const diffcore::Tensor& t) {
  const auto bytes = std::as_bytes(t.data());
  return nets::sha256_hex(
      std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()));
}

std::string file_hash(const std::filesystem::path& path) { return nets::file_sha256(path); }

std::string short_hash(const std::string& hex) { return hex.substr(0, 16); }

}  // namespace repa::harness
