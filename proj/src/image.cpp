#include "icr/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "icr/errors.hpp"

namespace icr {

GrayImage::GrayImage(int w, int h, float fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
  if (w < 0 || h < 0) throw InvalidArgument("negative image size");
}

float GrayImage::clamped(int row, int col) const {
  row = std::clamp(row, 0, height - 1);
  col = std::clamp(col, 0, width - 1);
  return at(row, col);
}

GrayImage read_image(const std::filesystem::path& path) {
  const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_ANYCOLOR | cv::IMREAD_ANYDEPTH);
  if (raw.empty()) throw FormatError("cannot read image " + path.string());
  cv::Mat unit;
  const double scale = raw.depth() == CV_16U ? 1.0 / 65535.0 : raw.depth() == CV_8U ? 1.0 / 255.0 : 1.0;
  raw.convertTo(unit, CV_MAKETYPE(CV_32F, raw.channels()), scale);

  GrayImage img(unit.cols, unit.rows);
  for (int r = 0; r < unit.rows; ++r) {
    for (int c = 0; c < unit.cols; ++c) {
      float v = 0.0f;
      switch (unit.channels()) {
        case 1:
          v = unit.at<float>(r, c);
          break;
        case 3: {
          const auto bgr = unit.at<cv::Vec3f>(r, c);
          v = 0.299f * bgr[2] + 0.587f * bgr[1] + 0.114f * bgr[0];
          break;
        }
        case 4: {
          const auto bgra = unit.at<cv::Vec4f>(r, c);
          v = 0.299f * bgra[2] + 0.587f * bgra[1] + 0.114f * bgra[0];
          break;
        }
        default:
          throw FormatError("unsupported channel count in " + path.string());
      }
      img.at(r, c) = v;
    }
  }
  return img;
}

void write_png(const GrayImage& img, const std::filesystem::path& path) {
  cv::Mat out(img.height, img.width, CV_8UC1);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      out.at<unsigned char>(r, c) =
          static_cast<unsigned char>(std::lround(std::clamp(img.at(r, c), 0.0f, 1.0f) * 255.0f));
    }
  }
  if (!cv::imwrite(path.string(), out)) throw Error("cannot write image " + path.string());
}

GrayImage resample(const GrayImage& img, double top, double left, double scale, int out_height, int out_width) {
  if (img.empty()) throw InvalidArgument("resample of an empty image");
  if (!(scale > 0.0)) throw InvalidArgument("resample scale must be positive");
  GrayImage out(out_width, out_height);
  // Box prefilter when shrinking so large source images do not alias.
  const GrayImage* src = &img;
  GrayImage smoothed;
  if (scale < 0.75) {
    cv::Mat m(img.height, img.width, CV_32F, const_cast<float*>(img.pixels.data()));
    cv::Mat blurred;
    const int k = std::max(3, static_cast<int>(std::lround(1.0 / scale)) | 1);
    cv::blur(m, blurred, cv::Size(k, k), cv::Point(-1, -1), cv::BORDER_REPLICATE);
    smoothed = GrayImage(img.width, img.height);
    std::copy(blurred.ptr<float>(), blurred.ptr<float>() + smoothed.pixels.size(), smoothed.pixels.begin());
    src = &smoothed;
  }
  for (int r = 0; r < out_height; ++r) {
    const double y = top + r / scale;
    const int y0 = static_cast<int>(std::floor(y));
    const double fy = y - y0;
    for (int c = 0; c < out_width; ++c) {
      const double x = left + c / scale;
      const int x0 = static_cast<int>(std::floor(x));
      const double fx = x - x0;
      const double v = (1 - fy) * ((1 - fx) * src->clamped(y0, x0) + fx * src->clamped(y0, x0 + 1)) +
                       fy * ((1 - fx) * src->clamped(y0 + 1, x0) + fx * src->clamped(y0 + 1, x0 + 1));
      out.at(r, c) = static_cast<float>(v);
    }
  }
  return out;
}

}  // namespace icr
