#pragma once
// Stand-ins for the unavailable clean-image features.

#include <string_view>

#include "repa/degrade/degrade.hpp"
#include "repa/nets/feature_encoder.hpp"

namespace repa::solve {

using diffcore::Tensor;

enum class ProxyRule { measurement, denoised };

std::string_view proxy_name(ProxyRule rule);
ProxyRule parse_proxy(std::string_view name);  // throws ConfigError

// measurement: features of y mapped to image shape (nearest upsampling for
// super-resolution). denoised: features of the current decoded estimate,
// which must then be given.
nets::PatchFeatures proxy_features(ProxyRule rule, const degrade::DegradationOp& op, const Tensor& y,
                                   const Tensor* denoised, const nets::FeatureEncoder& encoder);

}  // namespace repa::solve
