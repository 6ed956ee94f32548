#include "icr/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "icr/errors.hpp"

namespace icr {
namespace {

static_assert(sizeof(double) == 8, "64-bit doubles required");

class Writer {
 public:
  void u32(std::uint32_t v) { le(v); }
  void u64(std::uint64_t v) { le(v); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }

  void matrix(const Matrix& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
  }

  std::string take() { return std::move(buf_); }
  void raw(const char* p, std::size_t n) { buf_.append(p, n); }

 private:
  template <typename T>
  void le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint32_t u32() { return le<std::uint32_t>(); }
  std::uint64_t u64() { return le<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }

  Matrix matrix(std::uint64_t rows, std::uint64_t cols, const char* what) {
    const auto r = u64();
    const auto c = u64();
    if (r != rows || c != cols) {
      std::ostringstream msg;
      msg << what << " is " << r << "x" << c << ", header implies " << rows << "x" << cols;
      throw FormatError(msg.str());
    }
    need(r * c * 8, what);
    Matrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = f64();
    }
    return m;
  }

  void magic() {
    need(4, "magic");
    if (std::memcmp(bytes_.data(), kModelMagic, 4) != 0) throw FormatError("bad magic: not an ICR1 model file");
    pos_ = 4;
  }

  void expect_end() const {
    if (pos_ != bytes_.size()) {
      throw FormatError("unexpected " + std::to_string(bytes_.size() - pos_) + " trailing bytes");
    }
  }

 private:
  void need(std::uint64_t n, const char* what) const {
    if (n > bytes_.size() - pos_) throw FormatError(std::string("truncated model file while reading ") + what);
  }

  template <typename T>
  T le() {
    need(sizeof(T), "scalar field");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_model(const CascadeModel& model) {
  model.validate();
  const std::uint64_t stages = model.stages.size();
  const std::uint64_t landmarks = model.landmarks();
  const std::uint64_t nodes = stages ? static_cast<std::uint64_t>(model.stages.front().elm.layer.nodes()) : 0;
  const std::uint64_t features = stages ? static_cast<std::uint64_t>(model.stages.front().elm.layer.features()) : 0;
  for (const auto& s : model.stages) {
    if (static_cast<std::uint64_t>(s.elm.layer.nodes()) != nodes) {
      throw FormatError("all stages must share the hidden node count");
    }
  }

  Writer w;
  w.raw(kModelMagic, 4);
  w.u32(kModelVersion);
  w.u64(stages);
  w.u64(landmarks);
  w.u64(nodes);
  w.u64(features);
  w.u32(static_cast<std::uint32_t>(Activation::Sigmoid));
  w.f64(stages ? model.stages.front().elm.ridge : 0.0);
  w.u32(static_cast<std::uint32_t>(model.descriptor.patch_size));
  w.u32(static_cast<std::uint32_t>(model.descriptor.grid));
  w.u32(static_cast<std::uint32_t>(model.descriptor.bins));
  w.matrix(model.reference_shape.coords);
  for (std::size_t t = 0; t < model.stages.size(); ++t) {
    const auto& elm = model.stages[t].elm;
    w.u64(elm.samples_seen);
    w.matrix(elm.layer.weights);
    w.matrix(elm.layer.biases);
    w.matrix(elm.beta);
    w.matrix(elm.kmat);
    w.matrix(model.stats[t].mu);
    w.matrix(model.stats[t].sigma);
  }
  return w.take();
}

CascadeModel deserialize_model(const std::string& bytes) {
  Reader r(bytes);
  r.magic();
  const auto version = r.u32();
  if (version != kModelVersion) throw FormatError("unsupported model version " + std::to_string(version));
  const auto stages = r.u64();
  const auto landmarks = r.u64();
  const auto nodes = r.u64();
  const auto features = r.u64();
  const auto activation = r.u32();
  if (activation != static_cast<std::uint32_t>(Activation::Sigmoid)) {
    throw FormatError("unknown activation id " + std::to_string(activation));
  }
  const double ridge = r.f64();
  CascadeModel model;
  model.descriptor.patch_size = static_cast<int>(r.u32());
  model.descriptor.grid = static_cast<int>(r.u32());
  model.descriptor.bins = static_cast<int>(r.u32());
  if (landmarks == 0 || stages > (1u << 20)) throw FormatError("implausible model header");
  model.reference_shape = Shape(r.matrix(2 * landmarks, 1, "reference shape"));

  for (std::uint64_t t = 0; t < stages; ++t) {
    StageRegressor stage;
    stage.stage_index = t;
    stage.elm.ridge = ridge;
    stage.elm.samples_seen = r.u64();
    stage.elm.layer.weights = r.matrix(nodes, features, "hidden weights");
    stage.elm.layer.biases = r.matrix(nodes, 1, "hidden biases");
    stage.elm.beta = r.matrix(nodes, 2 * landmarks, "beta");
    stage.elm.kmat = r.matrix(nodes, nodes, "kmat");
    Vector mu = r.matrix(2 * landmarks, 1, "stage mean");
    Matrix sigma = r.matrix(2 * landmarks, 2 * landmarks, "stage covariance");
    model.stages.push_back(std::move(stage));
    model.stats.push_back(StageStatistics::from_moments(std::move(mu), std::move(sigma)));
  }
  r.expect_end();
  model.validate();
  return model;
}

void write_file_atomically(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_model(const CascadeModel& model, const std::filesystem::path& path) {
  write_file_atomically(path, serialize_model(model));
}

CascadeModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize_model(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

bool models_identical(const CascadeModel& a, const CascadeModel& b) {
  if (a.stages.size() != b.stages.size() || !(a.reference_shape == b.reference_shape) ||
      !(a.descriptor == b.descriptor)) {
    return false;
  }
  auto same = [](const Matrix& x, const Matrix& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() &&
           std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) == 0;
  };
  for (std::size_t t = 0; t < a.stages.size(); ++t) {
    const auto& ea = a.stages[t].elm;
    const auto& eb = b.stages[t].elm;
    if (ea.samples_seen != eb.samples_seen || ea.ridge != eb.ridge || !same(ea.layer.weights, eb.layer.weights) ||
        !same(ea.layer.biases, eb.layer.biases) || !same(ea.beta, eb.beta) || !same(ea.kmat, eb.kmat) ||
        !same(a.stats[t].mu, b.stats[t].mu) || !same(a.stats[t].sigma, b.stats[t].sigma) ||
        !same(a.stats[t].chol, b.stats[t].chol)) {
      return false;
    }
  }
  return true;
}

}  // namespace icr
