#include "repa/nets/autoencoder.hpp"

#include <string>

#include "repa/diffcore/ops.hpp"
#include "repa/errors.hpp"

namespace repa::nets {

namespace d = repa::diffcore;

Autoencoder::Autoencoder(const AutoencoderConfig& config, std::uint64_t seed) : config_(config) {
  if (config.image_size() == 0 || config.hidden == 0 || config.latent == 0) {
    throw ShapeError("autoencoder: zero-sized layer");
  }
  Rng rng(seed);
  enc1_ = add_dense(params_, "encoder.0", config.image_size(), config.hidden, rng);
  enc2_ = add_dense(params_, "encoder.1", config.hidden, config.latent, rng);
  dec1_ = add_dense(params_, "decoder.0", config.latent, config.hidden, rng);
  dec2_ = add_dense(params_, "decoder.1", config.hidden, config.image_size(), rng);
  shift_ = params_.add("latent.shift", Tensor({1, config.latent}), false);
  scale_ = params_.add("latent.scale", Tensor::full({1, config.latent}, 1.0), false);
}

Var Autoencoder::encode_raw(const Binding& binding, Var x) const {
  if (x.shape().size() != 2 || x.shape()[1] != config_.image_size()) {
    throw ShapeError("autoencoder: expected [B, " + std::to_string(config_.image_size()) + "], got " +
                     d::shape_string(x.shape()));
  }
  return apply(binding, enc2_, d::gelu(apply(binding, enc1_, x)));
}

Var Autoencoder::decode_raw(const Binding& binding, Var code) const {
  if (code.shape().size() != 2 || code.shape()[1] != config_.latent) {
    throw ShapeError("autoencoder: expected [B, " + std::to_string(config_.latent) + "], got " +
                     d::shape_string(code.shape()));
  }
  return apply(binding, dec2_, d::gelu(apply(binding, dec1_, code)));
}

Tensor Autoencoder::tiled(std::size_t index, std::size_t rows, bool invert) const {
  const Tensor& v = params_.value(index);
  Tensor out({rows, config_.latent});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < config_.latent; ++j) out.at(r, j) = invert ? 1.0 / v[j] : v[j];
  }
  return out;
}

void Autoencoder::require_trained(const char* op) const {
  if (!trained_) throw NumericalError(std::string("autoencoder.") + op + ": model is untrained");
}

Var Autoencoder::encode(const Binding& binding, Var x) const {
  require_trained("encode");
  Var code = encode_raw(binding, x);
  const std::size_t rows = code.shape()[0];
  Var centered = d::sub(code, binding.graph().constant(tiled(shift_, rows, false)));
  return d::mask(centered, tiled(scale_, rows, true));
}

Var Autoencoder::decode(const Binding& binding, Var z) const {
  require_trained("decode");
  if (z.shape().size() != 2) throw ShapeError("autoencoder.decode: expected [B, d]");
  const std::size_t rows = z.shape()[0];
  Var code = d::add(d::mask(z, tiled(scale_, rows, false)), binding.graph().constant(tiled(shift_, rows, false)));
  return decode_raw(binding, code);
}

Tensor Autoencoder::encode(const Tensor& image) const {
  if (image.size() != config_.image_size()) throw ShapeError("autoencoder.encode: image size mismatch");
  Graph g;
  Binding b(g, params_, false);
  return encode(b, g.constant(image.reshaped({1, image.size()}))).value().reshaped({config_.latent});
}

Tensor Autoencoder::decode(const Tensor& z) const {
  if (z.size() != config_.latent) throw ShapeError("autoencoder.decode: latent size mismatch");
  Graph g;
  Binding b(g, params_, false);
  return decode(b, g.constant(z.reshaped({1, z.size()}))).value().reshaped({config_.height, config_.width});
}

void Autoencoder::set_latent_stats(const Tensor& shift, const Tensor& scale) {
  if (shift.size() != config_.latent || scale.size() != config_.latent) {
    throw ShapeError("autoencoder: latent statistics size mismatch");
  }
  for (double s : scale.data()) {
    if (!(s > 0.0)) throw NumericalError("autoencoder: latent scale must be positive");
  }
  params_.value(shift_) = shift.reshaped({1, config_.latent});
  params_.value(scale_) = scale.reshaped({1, config_.latent});
  trained_ = true;
}

}  // namespace repa::nets
