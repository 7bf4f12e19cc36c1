#include "repa/diffcore/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>

#include "repa/errors.hpp"
#include "repa/simd.hpp"

namespace repa::diffcore {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " elements");
  }
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::full(Shape shape, double v) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), v);
  return t;
}

Tensor Tensor::from(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept {
  // Exponent all ones means inf or nan; the integer form vectorises.
  constexpr std::uint64_t kExp = 0x7ff0000000000000ull;
  std::uint64_t bad = 0;
  for (double v : data_) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    bad |= static_cast<std::uint64_t>((bits & kExp) == kExp);
  }
  return bad == 0;
}

namespace {
void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}
}  // namespace

Tensor operator+(const Tensor& a, const Tensor& b) {
  require_same(a, b, "tensor +");
  Tensor r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
  return r;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  require_same(a, b, "tensor -");
  Tensor r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  return r;
}

Tensor operator*(double s, const Tensor& a) {
  Tensor r = a;
  for (double& v : r.data()) v *= s;
  return r;
}

double inner(const Tensor& a, const Tensor& b) {
  require_same(a, b, "inner");
  return simd::dot(a.ptr(), b.ptr(), a.size());
}

double squared_norm(const Tensor& a) { return simd::dot(a.ptr(), a.ptr(), a.size()); }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor transpose_matrix(const Tensor& m) {
  if (m.rank() != 2) throw ShapeError("transpose_matrix: rank " + std::to_string(m.rank()) + " input");
  Tensor out({m.dim(1), m.dim(0)});
  simd::transpose(m.ptr(), out.ptr(), m.dim(0), m.dim(1));
  return out;
}

}  // namespace repa::diffcore
