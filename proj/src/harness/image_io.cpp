#include "repa/harness/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "repa/errors.hpp"

namespace repa::harness {

static_assert(std::endian::native == std::endian::little, "raw sidecars assume a little-endian host");

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

// Next header token, skipping whitespace and '#' comments.
std::string token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

std::size_t number(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = token(in);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw ConfigError(path.string() + ": malformed PGM header");
  }
  return std::stoul(tok);
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 2) throw ShapeError("write_pgm: expected an [H, W] image");
  auto out = open_out(path);
  out << "P5\n" << image.dim(1) << ' ' << image.dim(0) << "\n65535\n";
  std::vector<unsigned char> bytes(image.size() * 2);
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::clamp(image[i], 0.0, 1.0);
    const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    bytes[2 * i] = static_cast<unsigned char>(q >> 8);
    bytes[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("write failed: " + path.string());
}

Tensor read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  if (token(in) != "P5") throw ConfigError(path.string() + ": not a binary graymap (P5)");
  const std::size_t w = number(in, path), h = number(in, path), maxval = number(in, path);
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw ConfigError(path.string() + ": bad PGM header");
  const std::size_t bpp = maxval < 256 ? 1 : 2;
  std::vector<unsigned char> bytes(w * h * bpp);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) throw ConfigError(path.string() + ": truncated");
  Tensor img({h, w});
  for (std::size_t i = 0; i < w * h; ++i) {
    const std::size_t v = bpp == 1 ? bytes[i] : (std::size_t{bytes[2 * i]} << 8) | bytes[2 * i + 1];
    if (v > maxval) throw ConfigError(path.string() + ": sample exceeds maxval");
    img[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return img;
}

void write_raw(const std::filesystem::path& path, const Tensor& values) {
  auto out = open_out(path);
  out.write(reinterpret_cast<const char*>(values.ptr()), static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!out) throw ConfigError("write failed: " + path.string());
}

Tensor read_raw(const std::filesystem::path& path, const diffcore::Shape& shape) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  Tensor t(shape);
  const auto bytes = static_cast<std::streamsize>(t.size() * sizeof(double));
  in.read(reinterpret_cast<char*>(t.ptr()), bytes);
  if (in.gcount() != bytes || in.peek() != EOF) {
    throw ConfigError(path.string() + ": expected exactly " + std::to_string(t.size()) + " float64 values");
  }
  return t;
}

}  // namespace repa::harness
