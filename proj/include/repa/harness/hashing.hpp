#pragma once
// Provenance hashes (SHA-256, hex).

#include <filesystem>
#include <string>

#include "repa/diffcore/tensor.hpp"
#include "repa/harness/config.hpp"

namespace repa::harness {

std::string config_hash(const ExperimentConfig& config);
// Over the raw float64 bytes; equal hashes mean bit-identical values.
std::string tensor_hash(const diffcore::Tensor& t);
std::string file_hash(const std::filesystem::path& path);
// First 16 hex digits, for tables.
std::string short_hash(const std::string& hex);

}  // namespace repa::harness
