#include "repa/theory/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "repa/errors.hpp"
#include "repa/rng.hpp"
#include "repa/theory/alignment.hpp"

namespace repa::theory {

std::string_view family_name(Family f) { return f == Family::superres ? "superres" : "blur"; }

degrade::DegradationOp ladder_op(Family family, double severity, std::size_t height, std::size_t width,
                                 double noise_std) {
  if (severity < 0.0) throw ShapeError("ladder_op: negative severity");
  if (family == Family::superres) {
    const auto factor = static_cast<std::size_t>(severity);
    if (static_cast<double>(factor) != severity) throw ShapeError("ladder_op: SR factor must be an integer");
    return degrade::DegradationOp::superres(height, width, std::max<std::size_t>(factor, 1), noise_std);
  }
  if (severity == 0.0) {
    return degrade::DegradationOp::blur(degrade::Kind::gaussblur, height, width, Tensor({1, 1}, {1.0}), noise_std);
  }
  const auto size = 2 * static_cast<std::size_t>(std::floor(3.0 * severity)) + 1;
  return degrade::DegradationOp::blur(degrade::Kind::gaussblur, height, width,
                                      degrade::gaussian_kernel(size, severity), noise_std);
}

std::vector<RobustnessPoint> RobustnessCurve::family(Family f) const {
  std::vector<RobustnessPoint> out;
  for (const auto& p : points)
    if (p.family == f) out.push_back(p);
  return out;
}

bool RobustnessCurve::monotone(Family f) const {
  const auto pts = family(f);
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i].similarity > pts[i - 1].similarity) return false;
  return true;
}

double RobustnessCurve::at(Family f, double severity) const {
  for (const auto& p : points)
    if (p.family == f && p.severity == severity) return p.similarity;
  throw ShapeError("robustness curve has no rung " + std::string(family_name(f)) + " " + std::to_string(severity));
}

void RobustnessCurve::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "family,severity,similarity,images\n" << std::setprecision(17);
  for (const auto& p : points) {
    out << family_name(p.family) << ',' << p.severity << ',' << p.similarity << ',' << images << '\n';
  }
  if (!out) throw ConfigError("write failed: " + path.string());
}

RobustnessCurve robustness_curve(std::span<const Tensor> images, const Ladder& ladder,
                                 const nets::FeatureEncoder& encoder) {
  if (images.empty()) throw ShapeError("robustness_curve: empty image set");
  const std::size_t h = encoder.config().height, w = encoder.config().width;
  std::vector<Tensor> clean;
  clean.reserve(images.size());
  for (const auto& x : images) clean.push_back(encoder.encode(x).rows);

  RobustnessCurve curve;
  curve.images = images.size();
  const auto rung = [&](Family f, double severity) {
    // The identity rung is noiseless by definition.
    const auto op = ladder_op(f, severity, h, w, severity == 0.0 ? 0.0 : ladder.noise_std);
    double total = 0.0;
    for (std::size_t i = 0; i < images.size(); ++i) {
      Tensor y;
      if (op.noise_std() > 0.0) {
        Rng rng(Rng::derive(ladder.seed, i));
        y = op.apply(images[i].reshaped({h, w}), rng);
      } else {
        y = op.forward(images[i].reshaped({h, w}));
      }
      total += mean_cosine(clean[i], encoder.encode(op.measurement_image(y)).rows);
    }
    curve.points.push_back({f, severity, total / static_cast<double>(images.size())});
  };
  rung(Family::superres, 0.0);
  for (std::size_t factor : ladder.sr_factors) rung(Family::superres, static_cast<double>(factor));
  rung(Family::blur, 0.0);
  for (double sigma : ladder.blur_sigmas) rung(Family::blur, sigma);
  return curve;
}

}  // namespace repa::theory
