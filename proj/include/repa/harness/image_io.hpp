#pragma once
// Binary graymaps (P5, 8- or 16-bit) and raw little-endian float64 sidecars.

#include <filesystem>

#include "repa/diffcore/tensor.hpp"

namespace repa::harness {

using diffcore::Tensor;

// Writes an [H, W] image in [0,1] as a 16-bit P5 graymap (values clamped,
// rounded to the nearest of 65536 levels).
void write_pgm(const std::filesystem::path& path, const Tensor& image);
// Reads a P5 graymap with maxval < 65536 into [0,1]; throws ConfigError on
// malformed files.
Tensor read_pgm(const std::filesystem::path& path);

// Exact values: shape is not stored, the caller supplies it.
void write_raw(const std::filesystem::path& path, const Tensor& values);
Tensor read_raw(const std::filesystem::path& path, const diffcore::Shape& shape);

}  // namespace repa::harness
