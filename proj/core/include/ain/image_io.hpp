#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ain/tensor.hpp"

namespace ain {

/// 8-bit grayscale raster, row-major.
struct GrayImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;
};

/// Binary PGM (P5, maxval 255).
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);

/// Reads a binary PGM (P5) or PPM (P6) into an (H, W, C) tensor scaled to
/// [0, 1], with C = 1 or 3. `.aint` files are loaded as tensors directly.
Tensor<float> read_image(const std::filesystem::path& path);

/// Maps values in [0, 1] to round(255 v), clamping outside that range.
GrayImage to_gray(const Tensor<float>& map);

/// Nearest-neighbour resample to (height, width).
GrayImage upscale_nearest(const GrayImage& image, std::size_t height, std::size_t width);

}  // namespace ain
