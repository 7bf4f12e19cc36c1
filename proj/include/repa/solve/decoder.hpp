#pragma once
// Maps solver states to images on the tape. Latent solvers decode through the
// autoencoder; pixel solvers use the identity; tests use affine stubs.

#include "repa/diffcore/graph.hpp"
#include "repa/nets/autoencoder.hpp"

namespace repa::solve {

using diffcore::Graph;
using diffcore::Shape;
using diffcore::Tensor;
using diffcore::Var;

class Decoder {
 public:
  virtual ~Decoder() = default;
  virtual Shape image_shape() const = 0;
  // state: any shape holding the prior's state; returns image_shape().
  virtual Var decode(Graph& graph, Var state) const = 0;
  Tensor decode(const Tensor& state) const;
};

class IdentityDecoder final : public Decoder {
 public:
  explicit IdentityDecoder(Shape image_shape) : shape_(std::move(image_shape)) {}
  Shape image_shape() const override { return shape_; }
  using Decoder::decode;
  Var decode(Graph& graph, Var state) const override;

 private:
  Shape shape_;
};

// x = M z + b with M [H*W, d], b [H*W].
class LinearDecoder final : public Decoder {
 public:
  LinearDecoder(Tensor matrix, Tensor bias, Shape image_shape);
  Shape image_shape() const override { return shape_; }
  using Decoder::decode;
  Var decode(Graph& graph, Var state) const override;
  const Tensor& matrix() const noexcept { return matrix_; }
  const Tensor& bias() const noexcept { return bias_; }

 private:
  Tensor matrix_, matrix_t_, bias_;
  Shape shape_;
};

class AutoencoderDecoder final : public Decoder {
 public:
  explicit AutoencoderDecoder(const nets::Autoencoder& ae);
  Shape image_shape() const override;
  using Decoder::decode;
  Var decode(Graph& graph, Var state) const override;

 private:
  const nets::Autoencoder* ae_;
};

}  // namespace repa::solve
