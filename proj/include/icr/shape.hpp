#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace icr {

/// Landmark coordinates laid out as [r_1, c_1, ..., r_L, c_L] in pixels.
struct Shape {
  Eigen::VectorXd coords;

  Shape() = default;
  explicit Shape(Eigen::VectorXd c);
  static Shape zeros(std::size_t landmarks);

  std::size_t landmarks() const { return static_cast<std::size_t>(coords.size() / 2); }
  double row(std::size_t l) const { return coords(2 * l); }
  double col(std::size_t l) const { return coords(2 * l + 1); }
  double& row(std::size_t l) { return coords(2 * l); }
  double& col(std::size_t l) { return coords(2 * l + 1); }

  bool operator==(const Shape& other) const;
};

struct BoundingBox {
  double top = 0.0;
  double left = 0.0;
  double height = 0.0;
  double width = 0.0;

  bool valid() const;
  bool operator==(const BoundingBox&) const = default;
};

/// Landmark index sets whose means serve as the two pupil proxies.
struct EvalConfig {
  std::string name;
  std::vector<std::size_t> left_eye;
  std::vector<std::size_t> right_eye;

  /// 68-point iBUG markup: mean of the six contour points of each eye.
  static EvalConfig ibug68();
  /// 29-point LFPW markup: the two annotated pupils.
  static EvalConfig lfpw29();
  /// Synthetic benchmark: landmark 0 and landmark L/2.
  static EvalConfig synthetic(std::size_t landmarks);
  /// Picks ibug68 / lfpw29 by landmark count, synthetic otherwise.
  static EvalConfig for_landmarks(std::size_t landmarks);
  /// Accepts a preset name (auto, ibug68, lfpw29, synthetic) or "1,2,3;4,5,6".
  static EvalConfig parse(const std::string& text, std::size_t landmarks);

  void validate(std::size_t landmarks) const;
};

struct CedPoint {
  double threshold;
  double fraction;
};

BoundingBox tight_bbox(const Shape& s);
BoundingBox expand_bbox(const BoundingBox& box, double fraction);

Shape mean_shape(std::span<const Shape> shapes);

/// Translates and anisotropically scales reference so its tight box equals box.
Shape place_in_bbox(const Shape& reference, const BoundingBox& box);

/// Sum of landmark distances / (L * inter-pupil distance of truth).
double normalized_mean_error(const Shape& pred, const Shape& truth, const EvalConfig& cfg);

/// Fraction of errors <= each threshold.
std::vector<CedPoint> ced_curve(std::span<const double> errors, std::span<const double> thresholds);

/// 0.000, 0.005, ..., 0.150.
std::vector<double> default_ced_thresholds();

}  // namespace icr
