#include "repa/solve/proxy.hpp"

#include <string>

#include "repa/errors.hpp"

namespace repa::solve {

std::string_view proxy_name(ProxyRule rule) {
  return rule == ProxyRule::measurement ? "measurement" : "denoised";
}

ProxyRule parse_proxy(std::string_view name) {
  if (name == "measurement") return ProxyRule::measurement;
  if (name == "denoised") return ProxyRule::denoised;
  throw ConfigError("unknown proxy rule '" + std::string(name) + "' (expected measurement or denoised)");
}

nets::PatchFeatures proxy_features(ProxyRule rule, const degrade::DegradationOp& op, const Tensor& y,
                                   const Tensor* denoised, const nets::FeatureEncoder& encoder) {
  if (rule == ProxyRule::denoised) {
    if (!denoised) throw ShapeError("proxy_features: denoised rule needs the current estimate");
    return encoder.encode(*denoised);
  }
  if (y.shape() != op.output_shape()) {
    throw ShapeError("proxy_features: measurement shape " + diffcore::shape_string(y.shape()) +
                     " does not match operator output " + diffcore::shape_string(op.output_shape()));
  }
  return encoder.encode(op.measurement_image(y));
}

}  // namespace repa::solve
