#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "icr/image.hpp"
#include "icr/sample.hpp"
#include "icr/shape.hpp"

namespace icr {

struct DescriptorConfig {
  int patch_size = 32;
  int grid = 4;
  int bins = 8;

  void validate() const;
  Eigen::Index length() const { return static_cast<Eigen::Index>(grid) * grid * bins; }
  bool operator==(const DescriptorConfig&) const = default;
};

struct Patch {
  int size = 0;
  std::vector<double> values;  // row-major size x size

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * size + c]; }
};

/// size x size window whose center pixel is the rounded (row, col); reads
/// outside the image clamp to the nearest edge pixel.
Patch extract_patch(const GrayImage& img, double row, double col, int size);

/// Dense grid of gradient-orientation histograms (grid x grid cells, bins
/// orientations each, magnitude weighted, linear interpolation between the two
/// nearest bin centers), L2 normalized: v / (||v|| + 1e-8).
Eigen::VectorXd patch_descriptor(const Patch& patch, const DescriptorConfig& cfg);

/// Per-landmark descriptors concatenated in landmark order.
Eigen::VectorXd shape_indexed_features(const GrayImage& img, const Shape& s, const DescriptorConfig& cfg);

/// Feature map f(sample, current shape) used by training and inference.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual Eigen::Index dimension(std::size_t landmarks) const = 0;
  virtual Eigen::VectorXd extract(const AlignmentSample& sample, const Shape& current) const = 0;
};

class DescriptorExtractor final : public FeatureExtractor {
 public:
  explicit DescriptorExtractor(DescriptorConfig cfg = {});

  Eigen::Index dimension(std::size_t landmarks) const override;
  Eigen::VectorXd extract(const AlignmentSample& sample, const Shape& current) const override;
  const DescriptorConfig& config() const { return cfg_; }

 private:
  DescriptorConfig cfg_;
};

/// Row i = extractor(samples[i], shapes[i]). Rows are extracted concurrently.
Eigen::MatrixXd extract_feature_matrix(std::span<const AlignmentSample> samples, std::span<const Shape> shapes,
                                       const FeatureExtractor& extractor);

/// Serial baseline of extract_feature_matrix.
Eigen::MatrixXd extract_feature_matrix_reference(std::span<const AlignmentSample> samples,
                                                 std::span<const Shape> shapes, const FeatureExtractor& extractor);

}  // namespace icr
