#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "ain/tensor.hpp"

namespace ain {

// On-disk tensor layout, all little-endian:
//   bytes 0..3   magic "AINT"
//   bytes 4..7   u32 rank
//   bytes 8..11  u32 element type (1 = f32, 2 = f64)
//   bytes 12..15 u32 reserved, zero
//   rank x u64 extents, then the raw elements in row-major order.
inline constexpr char kTensorMagic[4] = {'A', 'I', 'N', 'T'};

enum class ElementType : std::uint32_t { F32 = 1, F64 = 2 };

template <typename T>
void write_tensor(std::ostream& out, const Tensor<T>& t);

/// Reads a tensor; stored elements are converted to T when the types differ.
template <typename T>
Tensor<T> read_tensor(std::istream& in);

template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& t);

template <typename T>
Tensor<T> load_tensor(const std::filesystem::path& path);

}  // namespace ain
