#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace getnet {

/// h x w x b reflectance raster. Data is band-sequential: all of band 0 in
/// row-major order, then band 1, and so on.
struct HyperCube {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t bands = 0;
  std::vector<float> data;
  std::vector<double> wavelengths;  // empty or one entry per band

  HyperCube() = default;
  HyperCube(std::size_t h, std::size_t w, std::size_t b)
      : height(h), width(w), bands(b), data(h * w * b, 0.0f) {}

  std::size_t pixels() const noexcept { return height * width; }

  float at(std::size_t row, std::size_t col, std::size_t band) const {
    return data[band * pixels() + row * width + col];
  }
  float& at(std::size_t row, std::size_t col, std::size_t band) {
    return data[band * pixels() + row * width + col];
  }

  /// Spectral vector of one pixel (pixel index = row * width + col).
  std::vector<double> spectrum(std::size_t pixel) const;

  /// Throws ShapeError/DataError if any invariant is violated.
  void validate() const;
};

/// Per-pixel {0 = unchanged, 1 = changed}; used for ground truth and change maps.
struct BinaryMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> labels;

  BinaryMap() = default;
  BinaryMap(std::size_t h, std::size_t w) : height(h), width(w), labels(h * w, 0) {}

  std::size_t pixels() const noexcept { return height * width; }
  void validate() const;
};

struct CubePair {
  HyperCube time1;
  HyperCube time2;

  void validate() const;
};

/// Reads an ENVI header and its companion raw file. Supports bsq/bil/bip
/// interleave and float32/uint16/int16 data in either byte order.
HyperCube read_envi(const std::filesystem::path& header_path);

/// Writes `<base>.hdr` and `<base>.img` (bsq, float32, little-endian). A
/// trailing ".hdr" on `path` is stripped to form the base.
void write_envi(const HyperCube& cube, const std::filesystem::path& path);

/// Raw file that belongs to a header, found by the usual ENVI naming rules.
std::filesystem::path envi_data_path(const std::filesystem::path& header_path);

/// Binary PGM (P5). Bytes >= 128 read as 1.
BinaryMap read_map(const std::filesystem::path& path,
                   std::optional<std::pair<std::size_t, std::size_t>> expected_shape = {});
void write_map(const BinaryMap& map, const std::filesystem::path& path);

/// Divides both cubes by the largest absolute value found in either cube.
CubePair normalize_pair(const CubePair& pair);

/// Keeps the listed bands (strictly increasing indices) in order.
HyperCube select_bands(const HyperCube& cube, std::span<const std::size_t> keep);

}  // namespace getnet
