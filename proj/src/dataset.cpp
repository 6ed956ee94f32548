#include "icr/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include "icr/errors.hpp"

namespace fs = std::filesystem;

namespace icr {
namespace {

// Fraction of the box added on every side of the resampled working window.
constexpr double kWindowMargin = 0.3;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& token, double& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InvalidArgument("not a directory: " + dir.string());
  std::vector<fs::path> images;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) images.push_back(entry.path());
  }
  std::sort(images.begin(), images.end(),
            [](const fs::path& a, const fs::path& b) { return a.stem().string() < b.stem().string(); });
  for (std::size_t i = 1; i < images.size(); ++i) {
    if (images[i].stem() == images[i - 1].stem()) {
      throw InvalidArgument("duplicate image id '" + images[i].stem().string() + "' in " + dir.string());
    }
  }
  return images;
}

// Resamples the image around the box into the working frame.
AlignmentSample normalize_sample(const GrayImage& source, const Shape& truth, const BoundingBox& box,
                                 std::string id) {
  const double scale = kWorkingBoxWidth / box.width;
  ImageFrame frame{scale, box.top - kWindowMargin * box.height, box.left - kWindowMargin * box.width};
  const int out_h = static_cast<int>(std::ceil(box.height * (1.0 + 2.0 * kWindowMargin) * scale));
  const int out_w = static_cast<int>(std::ceil(box.width * (1.0 + 2.0 * kWindowMargin) * scale));

  AlignmentSample sample;
  sample.id = std::move(id);
  sample.frame = frame;
  sample.image = std::make_shared<const GrayImage>(
      resample(source, frame.row_offset, frame.col_offset, scale, out_h, out_w));
  sample.box = {(box.top - frame.row_offset) * scale, (box.left - frame.col_offset) * scale, box.height * scale,
                box.width * scale};
  if (truth.coords.size() > 0) {
    sample.truth = truth;
    for (std::size_t l = 0; l < truth.landmarks(); ++l) {
      sample.truth.row(l) = (truth.row(l) - frame.row_offset) * scale;
      sample.truth.col(l) = (truth.col(l) - frame.col_offset) * scale;
    }
  }
  return sample;
}

template <typename Fn>
void for_each_index_collecting(std::size_t n, Fn&& fn) {
  std::vector<std::exception_ptr> failures(n);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
}

}  // namespace

std::vector<Shape> Dataset::truths() const {
  std::vector<Shape> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.truth);
  return out;
}

Shape load_pts(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open annotation " + path.string());
  const std::string src = path.string();
  std::string line;
  std::size_t lineno = 0;

  auto next_line = [&](const char* expecting) {
    while (std::getline(in, line)) {
      ++lineno;
      line = trim(line);
      if (!line.empty()) return;
    }
    throw ParseError(src, lineno, std::string("unexpected end of file, expected ") + expecting);
  };
  auto header_value = [&](const std::string& key) {
    if (line.rfind(key, 0) != 0) throw ParseError(src, lineno, "expected '" + key + "'");
    return trim(line.substr(key.size()));
  };

  next_line("version header");
  double version = 0.0;
  if (!parse_double(header_value("version:"), version)) throw ParseError(src, lineno, "bad version value");

  next_line("n_points header");
  const std::string count_text = header_value("n_points:");
  long count = 0;
  {
    const auto [ptr, ec] = std::from_chars(count_text.data(), count_text.data() + count_text.size(), count);
    if (ec != std::errc() || ptr != count_text.data() + count_text.size() || count < 1) {
      throw ParseError(src, lineno, "bad n_points value '" + count_text + "'");
    }
  }

  next_line("'{'");
  if (line != "{") throw ParseError(src, lineno, "expected '{'");

  Shape s = Shape::zeros(static_cast<std::size_t>(count));
  for (long l = 0; l < count; ++l) {
    next_line("a point line");
    if (line == "}") {
      throw ParseError(src, lineno, "expected " + std::to_string(count) + " points, found " + std::to_string(l));
    }
    std::istringstream tokens(line);
    std::string xs, ys, extra;
    tokens >> xs >> ys;
    double x = 0.0, y = 0.0;
    if (ys.empty() || (tokens >> extra) || !parse_double(xs, x) || !parse_double(ys, y)) {
      throw ParseError(src, lineno, "expected two numbers, got '" + line + "'");
    }
    s.row(static_cast<std::size_t>(l)) = y;
    s.col(static_cast<std::size_t>(l)) = x;
  }
  next_line("'}'");
  if (line != "}") throw ParseError(src, lineno, "more points than n_points = " + std::to_string(count));
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) throw ParseError(src, lineno, "trailing content after '}'");
  }
  return s;
}

void save_pts(const Shape& s, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "version: 1\n"
      << "n_points: " << s.landmarks() << "\n{\n";
  for (std::size_t l = 0; l < s.landmarks(); ++l) {
    out << format_double(s.col(l)) << ' ' << format_double(s.row(l)) << '\n';
  }
  out << "}\n";
  if (!out) throw Error("failed writing " + path.string());
}

std::map<std::string, BoundingBox> load_bboxes(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open bbox file " + path.string());
  const std::string src = path.string();
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || trim(line) != "id,top,left,height,width") {
    throw ParseError(src, 1, "expected header 'id,top,left,height,width'");
  }
  std::map<std::string, BoundingBox> boxes;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split(trim(line), ',');
    if (fields.size() != 5) throw ParseError(src, lineno, "expected 5 fields");
    BoundingBox box;
    if (!parse_double(fields[1], box.top) || !parse_double(fields[2], box.left) ||
        !parse_double(fields[3], box.height) || !parse_double(fields[4], box.width)) {
      throw ParseError(src, lineno, "non-numeric box field");
    }
    if (!box.valid()) throw ParseError(src, lineno, "box height and width must be positive");
    if (!boxes.emplace(fields[0], box).second) throw ParseError(src, lineno, "duplicate id '" + fields[0] + "'");
  }
  return boxes;
}

void save_bboxes(const std::map<std::string, BoundingBox>& boxes, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "id,top,left,height,width\n";
  for (const auto& [id, b] : boxes) {
    out << id << ',' << format_double(b.top) << ',' << format_double(b.left) << ',' << format_double(b.height)
        << ',' << format_double(b.width) << '\n';
  }
}

Dataset load_dataset(const fs::path& images_dir, const fs::path& annotations_dir, const fs::path& bbox_file) {
  const auto images = list_images(images_dir);
  if (images.empty()) throw InvalidArgument("no images found in " + images_dir.string());
  std::map<std::string, BoundingBox> boxes;
  if (!bbox_file.empty() && fs::exists(bbox_file)) boxes = load_bboxes(bbox_file);

  std::vector<Shape> truths(images.size());
  for_each_index_collecting(images.size(), [&](std::size_t i) {
    const fs::path pts = annotations_dir / (images[i].stem().string() + ".pts");
    if (!fs::exists(pts)) throw Error("missing annotation " + pts.string() + " for " + images[i].string());
    truths[i] = load_pts(pts);
  });

  std::map<std::size_t, std::size_t> counts;
  for (const auto& t : truths) ++counts[t.landmarks()];
  if (counts.size() > 1) {
    const auto majority =
        std::max_element(counts.begin(), counts.end(), [](auto& a, auto& b) { return a.second < b.second; })->first;
    std::string offenders;
    for (std::size_t i = 0; i < truths.size(); ++i) {
      if (truths[i].landmarks() != majority) {
        offenders += " " + images[i].stem().string() + "(" + std::to_string(truths[i].landmarks()) + ")";
      }
    }
    throw Error("inconsistent landmark counts (expected " + std::to_string(majority) + "):" + offenders);
  }

  Dataset data;
  data.landmark_count = truths.front().landmarks();
  data.samples.resize(images.size());
  for_each_index_collecting(images.size(), [&](std::size_t i) {
    const std::string id = images[i].stem().string();
    BoundingBox box;
    if (auto it = boxes.find(id); it != boxes.end()) {
      box = it->second;
    } else {
      box = expand_bbox(tight_bbox(truths[i]), 0.2);
#pragma omp critical(icr_log)
      std::clog << "[icr] no box for '" << id << "', using expanded landmark box\n";
    }
    if (!box.valid()) throw Error("degenerate face box for '" + id + "'");
    data.samples[i] = normalize_sample(read_image(images[i]), truths[i], box, id);
  });
  return data;
}

Dataset load_dataset_dir(const fs::path& root) {
  return load_dataset(root / "images", root / "annotations", root / "bboxes.csv");
}

Dataset load_images_for_prediction(const fs::path& images_dir, const fs::path& bbox_file) {
  const auto images = list_images(images_dir);
  if (images.empty()) throw InvalidArgument("no images found in " + images_dir.string());
  const auto boxes = load_bboxes(bbox_file);
  Dataset data;
  data.samples.resize(images.size());
  for_each_index_collecting(images.size(), [&](std::size_t i) {
    const std::string id = images[i].stem().string();
    const auto it = boxes.find(id);
    if (it == boxes.end()) throw Error("no face box for '" + id + "' in " + bbox_file.string());
    data.samples[i] = normalize_sample(read_image(images[i]), Shape{}, it->second, id);
  });
  return data;
}

void save_dataset(const Dataset& data, const fs::path& root) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "annotations");
  std::map<std::string, BoundingBox> boxes;
  for (const auto& s : data.samples) {
    write_png(*s.image, root / "images" / (s.id + ".png"));
    save_pts(to_source_frame(s.truth, s.frame), root / "annotations" / (s.id + ".pts"));
    const auto& f = s.frame;
    boxes[s.id] = {s.box.top / f.scale + f.row_offset, s.box.left / f.scale + f.col_offset, s.box.height / f.scale,
                   s.box.width / f.scale};
  }
  save_bboxes(boxes, root / "bboxes.csv");
}

Shape to_source_frame(const Shape& s, const ImageFrame& frame) {
  Shape out = s;
  for (std::size_t l = 0; l < s.landmarks(); ++l) {
    out.row(l) = s.row(l) / frame.scale + frame.row_offset;
    out.col(l) = s.col(l) / frame.scale + frame.col_offset;
  }
  return out;
}

Dataset generate_synthetic(std::size_t n_samples, std::size_t landmarks, double noise_level, std::uint64_t seed,
                           const SyntheticOptions& opt) {
  if (n_samples < 2) throw InvalidArgument("synthetic dataset needs at least 2 samples");
  if (landmarks < 2) throw InvalidArgument("synthetic dataset needs at least 2 landmarks");
  if (!(noise_level >= 0.0)) throw InvalidArgument("noise level must be >= 0");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Reference polygon: ellipse with the "eyes" (0 and L/2) on the horizontal axis.
  constexpr double kRowRadius = 95.0;
  constexpr double kColRadius = 80.0;
  Shape reference = Shape::zeros(landmarks);
  for (std::size_t l = 0; l < landmarks; ++l) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(l) / static_cast<double>(landmarks);
    reference.row(l) = kRowRadius * std::sin(angle);
    reference.col(l) = -kColRadius * std::cos(angle);
  }

  Dataset data;
  data.landmark_count = landmarks;
  data.eval_preset = "synthetic";
  data.samples.reserve(n_samples);
  const int digits = static_cast<int>(std::to_string(n_samples - 1).size());

  for (std::size_t i = 0; i < n_samples; ++i) {
    const double scale = 1.0 + opt.pose_jitter * gauss(rng);
    const double aspect = 1.0 + 0.5 * opt.pose_jitter * gauss(rng);
    const double rot = opt.pose_jitter * gauss(rng);
    const double cr = std::cos(rot), sr = std::sin(rot);
    Shape truth = Shape::zeros(landmarks);
    for (std::size_t l = 0; l < landmarks; ++l) {
      const double r = reference.row(l) * scale * aspect;
      const double c = reference.col(l) * scale / aspect;
      truth.row(l) = cr * r + sr * c + opt.landmark_jitter * gauss(rng);
      truth.col(l) = -sr * r + cr * c + opt.landmark_jitter * gauss(rng);
    }

    // Detector-like box: expanded tight box with relative position/size noise.
    BoundingBox box = expand_bbox(tight_bbox(truth), 0.2);
    box.top += opt.box_jitter * box.height * gauss(rng);
    box.left += opt.box_jitter * box.width * gauss(rng);
    box.height *= 1.0 + opt.box_jitter * gauss(rng);
    box.width *= 1.0 + opt.box_jitter * gauss(rng);

    // Rescale to the working frame and center the box on the canvas.
    const double k = kWorkingBoxWidth / box.width;
    const int width = static_cast<int>(std::ceil(box.width * k * (1.0 + 2.0 * kWindowMargin)));
    const int height = static_cast<int>(std::ceil(box.height * k * (1.0 + 2.0 * kWindowMargin)));
    const double row_shift = 0.5 * height - (box.top + 0.5 * box.height) * k;
    const double col_shift = 0.5 * width - (box.left + 0.5 * box.width) * k;
    for (std::size_t l = 0; l < landmarks; ++l) {
      truth.row(l) = truth.row(l) * k + row_shift;
      truth.col(l) = truth.col(l) * k + col_shift;
    }
    box = {box.top * k + row_shift, box.left * k + col_shift, box.height * k, box.width * k};

    GrayImage img(width, height, 0.5f);
    const double two_sigma2 = 2.0 * opt.blob_sigma * opt.blob_sigma;
    const int reach = static_cast<int>(std::ceil(4.0 * opt.blob_sigma));
    for (std::size_t l = 0; l < landmarks; ++l) {
      const double amp = (l % 2 == 0 ? 1.0 : -1.0) * opt.blob_amplitude;
      const int r0 = static_cast<int>(std::lround(truth.row(l)));
      const int c0 = static_cast<int>(std::lround(truth.col(l)));
      for (int r = std::max(0, r0 - reach); r <= std::min(height - 1, r0 + reach); ++r) {
        for (int c = std::max(0, c0 - reach); c <= std::min(width - 1, c0 + reach); ++c) {
          const double dr = r - truth.row(l), dc = c - truth.col(l);
          img.at(r, c) += static_cast<float>(amp * std::exp(-(dr * dr + dc * dc) / two_sigma2));
        }
      }
    }
    if (noise_level > 0.0) {
      for (auto& p : img.pixels) p += static_cast<float>(noise_level * gauss(rng));
    }
    for (auto& p : img.pixels) p = std::clamp(p, 0.0f, 1.0f);

    AlignmentSample sample;
    std::string id = std::to_string(i);
    sample.id = "synth_" + std::string(static_cast<std::size_t>(digits) - id.size(), '0') + id;
    sample.truth = std::move(truth);
    sample.box = box;
    sample.image = std::make_shared<const GrayImage>(std::move(img));
    data.samples.push_back(std::move(sample));
  }
  return data;
}

}  // namespace icr
