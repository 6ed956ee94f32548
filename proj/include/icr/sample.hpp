#pragma once

#include <memory>
#include <string>

#include "icr/image.hpp"
#include "icr/shape.hpp"

namespace icr {

/// Maps working-frame coordinates back to the source image:
/// source = working / scale + offset.
struct ImageFrame {
  double scale = 1.0;
  double row_offset = 0.0;
  double col_offset = 0.0;
};

struct AlignmentSample {
  std::shared_ptr<const GrayImage> image;
  Shape truth;
  BoundingBox box;
  std::string id;
  ImageFrame frame;
};

}  // namespace icr
