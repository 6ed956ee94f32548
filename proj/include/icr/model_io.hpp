#pragma once

// Binary model container, all fields little-endian:
//
//   "ICR1"  u32 version
//   u64 T, u64 L, u64 K, u64 feature_dim, u32 activation, f64 ridge,
//   u32 patch_size, u32 grid, u32 bins
//   matrix reference_shape (2L x 1)
//   per stage: u64 samples_seen, matrix a (K x f), matrix b (K x 1),
//              matrix beta (K x 2L), matrix kmat (K x K),
//              matrix mu (2L x 1), matrix sigma (2L x 2L)
//
// where matrix = u64 rows, u64 cols, rows*cols f64 in row-major order.

#include <cstdint>
#include <filesystem>
#include <string>

#include "icr/cascade.hpp"

namespace icr {

inline constexpr char kModelMagic[4] = {'I', 'C', 'R', '1'};
inline constexpr std::uint32_t kModelVersion = 1;

std::string serialize_model(const CascadeModel& model);
CascadeModel deserialize_model(const std::string& bytes);

/// Writes to a temporary sibling and renames it over `path`.
void save_model(const CascadeModel& model, const std::filesystem::path& path);
CascadeModel load_model(const std::filesystem::path& path);

/// Exact equality of every stored field.
bool models_identical(const CascadeModel& a, const CascadeModel& b);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_file_atomically(const std::filesystem::path& path, const std::string& contents);

}  // namespace icr
