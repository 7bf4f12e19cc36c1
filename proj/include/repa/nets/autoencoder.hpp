#pragma once
// Perceptron autoencoder defining the latent space of the latent solvers.
// Latents are standardized per dimension with a stored shift and scale, so
// the latent flow prior sees roughly unit-variance data.

#include "repa/nets/params.hpp"

namespace repa::nets {

struct AutoencoderConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t hidden = 256;
  std::size_t latent = 64;

  std::size_t image_size() const { return height * width; }
};

class Autoencoder {
 public:
  Autoencoder(const AutoencoderConfig& config, std::uint64_t seed);

  const AutoencoderConfig& config() const noexcept { return config_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }

  // Unstandardized maps used during training: x [B, H*W] <-> code [B, d].
  Var encode_raw(const Binding& binding, Var x) const;
  Var decode_raw(const Binding& binding, Var code) const;

  // Standardized latents; throw NumericalError on an untrained model.
  Var encode(const Binding& binding, Var x) const;
  Var decode(const Binding& binding, Var z) const;
  Tensor encode(const Tensor& image) const;  // -> [d]
  Tensor decode(const Tensor& z) const;      // -> [H, W]

  // Installs latent statistics and marks the model trained.
  void set_latent_stats(const Tensor& shift, const Tensor& scale);
  bool trained() const noexcept { return trained_; }
  void set_trained(bool trained) { trained_ = trained; }

 private:
  void require_trained(const char* op) const;
  Tensor tiled(std::size_t index, std::size_t rows, bool invert) const;

  AutoencoderConfig config_;
  ParameterSet params_;
  Dense enc1_, enc2_, dec1_, dec2_;
  std::size_t shift_ = 0, scale_ = 0;
  bool trained_ = false;
};

}  // namespace repa::nets
