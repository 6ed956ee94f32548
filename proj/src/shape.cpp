#include "icr/shape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "icr/errors.hpp"

namespace icr {
namespace {

Eigen::Vector2d eye_center(const Shape& s, const std::vector<std::size_t>& indices) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (auto l : indices) c += Eigen::Vector2d(s.row(l), s.col(l));
  return c / static_cast<double>(indices.size());
}

std::vector<std::size_t> parse_index_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t pos = 0;
      const long v = std::stol(item, &pos);
      if (pos != item.size() || v < 0) throw InvalidArgument("");
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw InvalidArgument("bad landmark index '" + item + "' in eval config");
    }
  }
  return out;
}

}  // namespace

Shape::Shape(Eigen::VectorXd c) : coords(std::move(c)) {
  if (coords.size() % 2 != 0) throw InvalidArgument("shape vector length must be even");
}

Shape Shape::zeros(std::size_t landmarks) {
  return Shape(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * landmarks)));
}

bool Shape::operator==(const Shape& other) const {
  return coords.size() == other.coords.size() && coords == other.coords;
}

bool BoundingBox::valid() const {
  return std::isfinite(top) && std::isfinite(left) && std::isfinite(height) && std::isfinite(width) &&
         height > 0.0 && width > 0.0;
}

EvalConfig EvalConfig::ibug68() {
  return {"ibug68", {36, 37, 38, 39, 40, 41}, {42, 43, 44, 45, 46, 47}};
}

EvalConfig EvalConfig::lfpw29() { return {"lfpw29", {16}, {17}}; }

EvalConfig EvalConfig::synthetic(std::size_t landmarks) {
  return {"synthetic", {0}, {landmarks / 2}};
}

EvalConfig EvalConfig::for_landmarks(std::size_t landmarks) {
  if (landmarks == 68) return ibug68();
  if (landmarks == 29) return lfpw29();
  return synthetic(landmarks);
}

EvalConfig EvalConfig::parse(const std::string& text, std::size_t landmarks) {
  EvalConfig cfg;
  if (text.empty() || text == "auto") {
    cfg = for_landmarks(landmarks);
  } else if (text == "ibug68") {
    cfg = ibug68();
  } else if (text == "lfpw29") {
    cfg = lfpw29();
  } else if (text == "synthetic") {
    cfg = synthetic(landmarks);
  } else {
    const auto semi = text.find(';');
    if (semi == std::string::npos) {
      throw InvalidArgument("eval config must be a preset or 'left,indices;right,indices'");
    }
    cfg.name = "custom";
    cfg.left_eye = parse_index_list(text.substr(0, semi));
    cfg.right_eye = parse_index_list(text.substr(semi + 1));
  }
  cfg.validate(landmarks);
  return cfg;
}

void EvalConfig::validate(std::size_t landmarks) const {
  if (left_eye.empty() || right_eye.empty()) throw InvalidArgument("eye index sets must be non-empty");
  for (auto l : left_eye) {
    if (l >= landmarks) throw InvalidArgument("left eye index out of range");
    if (std::find(right_eye.begin(), right_eye.end(), l) != right_eye.end()) {
      throw InvalidArgument("eye index sets must be disjoint");
    }
  }
  for (auto l : right_eye) {
    if (l >= landmarks) throw InvalidArgument("right eye index out of range");
  }
}

BoundingBox tight_bbox(const Shape& s) {
  if (s.landmarks() == 0) throw InvalidArgument("empty shape has no bounding box");
  double rmin = s.row(0), rmax = s.row(0), cmin = s.col(0), cmax = s.col(0);
  for (std::size_t l = 1; l < s.landmarks(); ++l) {
    rmin = std::min(rmin, s.row(l));
    rmax = std::max(rmax, s.row(l));
    cmin = std::min(cmin, s.col(l));
    cmax = std::max(cmax, s.col(l));
  }
  return {rmin, cmin, rmax - rmin, cmax - cmin};
}

BoundingBox expand_bbox(const BoundingBox& box, double fraction) {
  const double dh = box.height * fraction;
  const double dw = box.width * fraction;
  return {box.top - 0.5 * dh, box.left - 0.5 * dw, box.height + dh, box.width + dw};
}

Shape mean_shape(std::span<const Shape> shapes) {
  if (shapes.empty()) throw InvalidArgument("mean_shape of an empty list");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(shapes.front().coords.size());
  for (const auto& s : shapes) {
    if (s.coords.size() != sum.size()) throw DimensionMismatch("shapes differ in landmark count");
    sum += s.coords;
  }
  return Shape(sum / static_cast<double>(shapes.size()));
}

Shape place_in_bbox(const Shape& reference, const BoundingBox& box) {
  const BoundingBox ref = tight_bbox(reference);
  if (!(ref.height > 0.0) || !(ref.width > 0.0)) {
    throw InvalidArgument("reference shape is degenerate (zero extent)");
  }
  if (ref == box) return reference;
  const double sr = box.height / ref.height;
  const double sc = box.width / ref.width;
  Shape out = reference;
  for (std::size_t l = 0; l < reference.landmarks(); ++l) {
    out.row(l) = box.top + (reference.row(l) - ref.top) * sr;
    out.col(l) = box.left + (reference.col(l) - ref.left) * sc;
  }
  return out;
}

double normalized_mean_error(const Shape& pred, const Shape& truth, const EvalConfig& cfg) {
  if (pred.coords.size() != truth.coords.size()) throw DimensionMismatch("pred and truth differ in landmark count");
  const std::size_t landmarks = truth.landmarks();
  cfg.validate(landmarks);
  const double iod = (eye_center(truth, cfg.left_eye) - eye_center(truth, cfg.right_eye)).norm();
  if (!(iod > 0.0)) throw InvalidArgument("inter-pupil distance is zero");
  double sum = 0.0;
  for (std::size_t l = 0; l < landmarks; ++l) {
    sum += std::hypot(pred.row(l) - truth.row(l), pred.col(l) - truth.col(l));
  }
  return sum / (static_cast<double>(landmarks) * iod);
}

std::vector<CedPoint> ced_curve(std::span<const double> errors, std::span<const double> thresholds) {
  if (errors.empty()) throw InvalidArgument("ced_curve needs at least one error");
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw InvalidArgument("CED thresholds must be sorted ascending");
  }
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<CedPoint> curve;
  curve.reserve(thresholds.size());
  for (double e : thresholds) {
    const auto count = std::upper_bound(sorted.begin(), sorted.end(), e) - sorted.begin();
    curve.push_back({e, static_cast<double>(count) / n});
  }
  return curve;
}

std::vector<double> default_ced_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 30; ++i) t.push_back(0.005 * i);
  return t;
}

}  // namespace icr
