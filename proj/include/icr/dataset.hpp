#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "icr/sample.hpp"
#include "icr/shape.hpp"

namespace icr {

struct Dataset {
  std::vector<AlignmentSample> samples;
  std::size_t landmark_count = 0;
  std::string eval_preset = "auto";

  std::size_t size() const { return samples.size(); }
  std::vector<Shape> truths() const;
};

/// Face boxes are normalized to this width in the working frame.
inline constexpr double kWorkingBoxWidth = 200.0;

/// Parses an iBUG .pts file. Points are stored as (x, y) = (col, row).
Shape load_pts(const std::filesystem::path& path);
void save_pts(const Shape& s, const std::filesystem::path& path);

/// `id,top,left,height,width` CSV with a mandatory header row.
std::map<std::string, BoundingBox> load_bboxes(const std::filesystem::path& path);
void save_bboxes(const std::map<std::string, BoundingBox>& boxes, const std::filesystem::path& path);

/// Loads images (PNG/JPEG) with matching <stem>.pts annotations. Samples are
/// sorted by id and rescaled so each face box is kWorkingBoxWidth wide. A
/// sample without a box entry (or without a box file) falls back to its tight
/// landmark box expanded by 20%.
Dataset load_dataset(const std::filesystem::path& images_dir, const std::filesystem::path& annotations_dir,
                     const std::filesystem::path& bbox_file);

/// Conventional layout: <root>/images, <root>/annotations, <root>/bboxes.csv.
Dataset load_dataset_dir(const std::filesystem::path& root);

/// Images and boxes only (truth left empty); used for prediction.
Dataset load_images_for_prediction(const std::filesystem::path& images_dir, const std::filesystem::path& bbox_file);

/// Writes a dataset in the conventional layout (8-bit PNG images).
void save_dataset(const Dataset& data, const std::filesystem::path& root);

/// Maps a working-frame shape back to source-image coordinates.
Shape to_source_frame(const Shape& s, const ImageFrame& frame);

struct SyntheticOptions {
  double landmark_jitter = 4.0;    // px, per landmark
  double pose_jitter = 0.06;       // relative scale / rotation (rad) spread
  double box_jitter = 0.04;        // relative spread of the detector box
  double blob_sigma = 9.0;         // px
  double blob_amplitude = 0.35;
};

/// Synthetic alignment data: ground truth is a perturbed elliptical polygon
/// and the image holds one signed Gaussian blob per landmark at its true
/// position, so gradients near an estimate point back to the truth.
Dataset generate_synthetic(std::size_t n_samples, std::size_t landmarks, double noise_level, std::uint64_t seed,
                           const SyntheticOptions& options = {});

}  // namespace icr
