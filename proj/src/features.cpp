#include "icr/features.hpp"

#include <cmath>
#include <exception>
#include <numbers>
#include <string>

#include "icr/errors.hpp"

namespace icr {
namespace {

constexpr double kNormEpsilon = 1e-8;

void check_rows(std::span<const AlignmentSample> samples, std::span<const Shape> shapes) {
  if (samples.size() != shapes.size()) throw DimensionMismatch("one shape per sample required");
}

}  // namespace

void DescriptorConfig::validate() const {
  if (patch_size < 2) throw InvalidArgument("patch_size must be >= 2");
  if (grid < 1 || patch_size % grid != 0) throw InvalidArgument("patch_size must be divisible by grid");
  if (bins < 2) throw InvalidArgument("bins must be >= 2");
}

Patch extract_patch(const GrayImage& img, double row, double col, int size) {
  if (size < 2) throw InvalidArgument("patch size must be >= 2");
  if (img.empty()) throw InvalidArgument("cannot extract a patch from an empty image");
  if (!std::isfinite(row) || !std::isfinite(col)) throw InvalidArgument("non-finite patch center");
  const int r0 = static_cast<int>(std::lround(row)) - size / 2;
  const int c0 = static_cast<int>(std::lround(col)) - size / 2;
  Patch p{size, std::vector<double>(static_cast<std::size_t>(size) * size)};
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      p.values[static_cast<std::size_t>(r) * size + c] = img.clamped(r0 + r, c0 + c);
    }
  }
  return p;
}

Eigen::VectorXd patch_descriptor(const Patch& patch, const DescriptorConfig& cfg) {
  cfg.validate();
  if (patch.size != cfg.patch_size) {
    throw DimensionMismatch("patch is " + std::to_string(patch.size) + " px, descriptor expects " +
                            std::to_string(cfg.patch_size));
  }
  const int n = patch.size;
  const int cell = n / cfg.grid;
  const double bin_width = 2.0 * std::numbers::pi / cfg.bins;
  Eigen::VectorXd hist = Eigen::VectorXd::Zero(cfg.length());

  for (int r = 0; r < n; ++r) {
    const int up = r > 0 ? r - 1 : r;
    const int down = r < n - 1 ? r + 1 : r;
    for (int c = 0; c < n; ++c) {
      const int lf = c > 0 ? c - 1 : c;
      const int rt = c < n - 1 ? c + 1 : c;
      const double gx = 0.5 * (patch.at(r, rt) - patch.at(r, lf));
      const double gy = 0.5 * (patch.at(down, c) - patch.at(up, c));
      const double mag = std::hypot(gx, gy);
      if (mag == 0.0) continue;
      double theta = std::atan2(gy, gx);
      if (theta < 0.0) theta += 2.0 * std::numbers::pi;
      // bin k is centered at (k + 0.5) * bin_width
      const double pos = theta / bin_width - 0.5;
      const double lo_f = std::floor(pos);
      const double frac = pos - lo_f;
      const int lo = (static_cast<int>(lo_f) % cfg.bins + cfg.bins) % cfg.bins;
      const int hi = (lo + 1) % cfg.bins;
      const Eigen::Index base = (static_cast<Eigen::Index>(r / cell) * cfg.grid + c / cell) * cfg.bins;
      hist(base + lo) += mag * (1.0 - frac);
      hist(base + hi) += mag * frac;
    }
  }
  const double norm = hist.norm();
  if (norm == 0.0) return hist;
  return hist / (norm + kNormEpsilon);
}

Eigen::VectorXd shape_indexed_features(const GrayImage& img, const Shape& s, const DescriptorConfig& cfg) {
  cfg.validate();
  if (!s.coords.allFinite()) throw InvalidArgument("non-finite shape");
  const Eigen::Index len = cfg.length();
  Eigen::VectorXd out(len * static_cast<Eigen::Index>(s.landmarks()));
  for (std::size_t l = 0; l < s.landmarks(); ++l) {
    out.segment(static_cast<Eigen::Index>(l) * len, len) =
        patch_descriptor(extract_patch(img, s.row(l), s.col(l), cfg.patch_size), cfg);
  }
  return out;
}

DescriptorExtractor::DescriptorExtractor(DescriptorConfig cfg) : cfg_(cfg) { cfg_.validate(); }

Eigen::Index DescriptorExtractor::dimension(std::size_t landmarks) const {
  return cfg_.length() * static_cast<Eigen::Index>(landmarks);
}

Eigen::VectorXd DescriptorExtractor::extract(const AlignmentSample& sample, const Shape& current) const {
  if (!sample.image) throw InvalidArgument("sample '" + sample.id + "' has no image");
  return shape_indexed_features(*sample.image, current, cfg_);
}

Eigen::MatrixXd extract_feature_matrix(std::span<const AlignmentSample> samples, std::span<const Shape> shapes,
                                       const FeatureExtractor& extractor) {
  check_rows(samples, shapes);
  const auto n = static_cast<Eigen::Index>(samples.size());
  if (n == 0) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd x(n, extractor.dimension(shapes.front().landmarks()));
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index i = 0; i < n; ++i) {
    try {
      const auto idx = static_cast<std::size_t>(i);
      const Eigen::VectorXd f = extractor.extract(samples[idx], shapes[idx]);
      if (f.size() != x.cols()) throw DimensionMismatch("feature length differs between samples");
      x.row(i) = f.transpose();
    } catch (...) {
#pragma omp critical(icr_feature_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return x;
}

Eigen::MatrixXd extract_feature_matrix_reference(std::span<const AlignmentSample> samples,
                                                 std::span<const Shape> shapes, const FeatureExtractor& extractor) {
  check_rows(samples, shapes);
  if (samples.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), extractor.dimension(shapes.front().landmarks()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Eigen::VectorXd f = extractor.extract(samples[i], shapes[i]);
    if (f.size() != x.cols()) throw DimensionMismatch("feature length differs between samples");
    x.row(static_cast<Eigen::Index>(i)) = f.transpose();
  }
  return x;
}

}  // namespace icr
