#include "repa/solve/decoder.hpp"

#include "repa/diffcore/ops.hpp"
#include "repa/errors.hpp"

namespace repa::solve {

namespace d = repa::diffcore;

Tensor Decoder::decode(const Tensor& state) const {
  Graph g;
  return decode(g, g.constant(state)).value();
}

Var IdentityDecoder::decode(Graph&, Var state) const {
  if (d::shape_size(state.shape()) != d::shape_size(shape_)) throw ShapeError("IdentityDecoder: size mismatch");
  return state.shape() == shape_ ? state : d::reshape(state, shape_);
}

LinearDecoder::LinearDecoder(Tensor matrix, Tensor bias, Shape image_shape)
    : matrix_(std::move(matrix)), bias_(std::move(bias)), shape_(std::move(image_shape)) {
  if (matrix_.rank() != 2 || matrix_.dim(0) != d::shape_size(shape_) || bias_.size() != matrix_.dim(0)) {
    throw ShapeError("LinearDecoder: expected M [H*W, d] and b [H*W]");
  }
  matrix_t_ = d::transpose_matrix(matrix_);
  bias_ = bias_.reshaped({1, bias_.size()});
}

Var LinearDecoder::decode(Graph& graph, Var state) const {
  const std::size_t dim = matrix_.dim(1);
  if (d::shape_size(state.shape()) != dim) throw ShapeError("LinearDecoder: state size mismatch");
  Var x = d::matmul(d::reshape(state, {1, dim}), graph.constant(matrix_t_, "decoder_matrix"));
  return d::reshape(d::add(x, graph.constant(bias_, "decoder_bias")), shape_);
}

AutoencoderDecoder::AutoencoderDecoder(const nets::Autoencoder& ae) : ae_(&ae) {
  if (!ae.trained()) throw NumericalError("AutoencoderDecoder: autoencoder is untrained");
}

Shape AutoencoderDecoder::image_shape() const { return {ae_->config().height, ae_->config().width}; }

Var AutoencoderDecoder::decode(Graph& graph, Var state) const {
  const std::size_t dim = ae_->config().latent;
  if (d::shape_size(state.shape()) != dim) throw ShapeError("AutoencoderDecoder: state size mismatch");
  nets::Binding b(graph, ae_->params(), false);
  return d::reshape(ae_->decode(b, d::reshape(state, {1, dim})), image_shape());
}

}  // namespace repa::solve
