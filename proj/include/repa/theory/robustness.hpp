#pragma once
// How far degradation moves encoder features: mean patch cosine between the
// features of a clean image and of its degraded, image-shaped measurement,
// along a severity ladder per operator family.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "repa/degrade/degrade.hpp"
#include "repa/nets/feature_encoder.hpp"

namespace repa::theory {

using diffcore::Tensor;

enum class Family { superres, blur };
std::string_view family_name(Family f);

struct Ladder {
  std::vector<std::size_t> sr_factors{4, 8, 16};
  std::vector<double> blur_sigmas{1.5, 3.0, 4.5};
  double noise_std = 0.0;
  std::uint64_t seed = 0;  // measurement noise, per image stream
};

// Operator at one rung; severity 0 is the identity. Gaussian kernels span
// 2 floor(3 sigma) + 1 pixels.
degrade::DegradationOp ladder_op(Family family, double severity, std::size_t height, std::size_t width,
                                 double noise_std);

struct RobustnessPoint {
  Family family = Family::superres;
  double severity = 0.0;
  double similarity = 0.0;  // mean over images of the mean patch cosine
};

struct RobustnessCurve {
  std::vector<RobustnessPoint> points;  // per family, severity 0 first, then the ladder
  std::size_t images = 0;

  std::vector<RobustnessPoint> family(Family f) const;
  bool monotone(Family f) const;  // non-increasing in severity
  bool monotone() const { return monotone(Family::superres) && monotone(Family::blur); }
  // Similarity at an exact rung; throws ShapeError if absent.
  double at(Family f, double severity) const;
  void write_csv(const std::filesystem::path& path) const;
};

RobustnessCurve robustness_curve(std::span<const Tensor> images, const Ladder& ladder,
                                 const nets::FeatureEncoder& encoder);

}  // namespace repa::theory
