#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "getnet/hsicube.hpp"
#include "getnet/unmixing.hpp"

namespace getnet {

/// Per-pixel n-vectors, n = b + 2m, laid out
/// [spectral 0..b | linear abundances b..b+m | nonlinear abundances b+m..n].
struct StackedCube {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t b = 0;
  std::size_t m = 0;
  std::vector<double> data;  // pixel-major

  std::size_t n() const noexcept { return b + 2 * m; }
  std::size_t pixels() const noexcept { return height * width; }
  std::span<const double> pixel(std::size_t index) const { return {data.data() + index * n(), n()}; }
  void validate() const;
};

enum class Region { A, B, C, D, E };

char region_name(Region r) noexcept;

/// Block structure of the n x n mixed-affinity matrix.
///   A: spectral x spectral          B: linear x linear
///   E: nonlinear x nonlinear        D: linear x nonlinear (both orders)
///   C: spectral x abundance (both orders), always zero
struct RegionLayout {
  std::size_t b = 0;
  std::size_t m = 0;

  std::size_t n() const noexcept { return b + 2 * m; }
  Region region_of(std::size_t i, std::size_t j) const;
};

struct MixedAffinityMatrix {
  RegionLayout layout;
  std::vector<double> values;  // row-major n x n

  double operator()(std::size_t i, std::size_t j) const { return values[i * layout.n() + j]; }
};

inline constexpr double kAffinityEps = 1e-6;

StackedCube stack_sources(const HyperCube& cube, const AbundanceCube& linear, const AbundanceCube& nonlinear);

/// K[i][j] = 1 - (p1[i] - p2[j]) / p2[j] outside region C, 0 inside C.
/// Denominators smaller than eps in magnitude are replaced by eps with the
/// sign of p2[j] (zero counts as positive).
MixedAffinityMatrix mixed_affinity(std::span<const double> p1, std::span<const double> p2,
                                   const RegionLayout& layout, double eps = kAffinityEps);

/// Writes the matrix into `out` (length n*n) without allocating.
template <typename T>
void mixed_affinity_into(std::span<const double> p1, std::span<const double> p2, const RegionLayout& layout,
                         double eps, std::span<T> out);

std::vector<MixedAffinityMatrix> affinity_batch(const StackedCube& s1, const StackedCube& s2,
                                                std::span<const std::size_t> pixel_indices,
                                                double eps = kAffinityEps);

/// Something that can produce the n x n network input for a pixel.
class AffinitySource {
 public:
  virtual ~AffinitySource() = default;
  virtual std::size_t side() const = 0;
  virtual std::size_t pixels() const = 0;
  virtual void fill(std::size_t pixel, std::span<float> out) const = 0;
};

/// Affinity matrices of corresponding pixels of two stacked cubes.
class StackedPairSource final : public AffinitySource {
 public:
  StackedPairSource(const StackedCube& s1, const StackedCube& s2, double eps = kAffinityEps);

  std::size_t side() const override { return layout_.n(); }
  std::size_t pixels() const override { return s1_.pixels(); }
  void fill(std::size_t pixel, std::span<float> out) const override;
  const RegionLayout& layout() const noexcept { return layout_; }

 private:
  const StackedCube& s1_;
  const StackedCube& s2_;
  RegionLayout layout_;
  double eps_;
};

/// Plain-text dump (one row per line) for inspection.
void write_affinity_text(const MixedAffinityMatrix& k, const std::filesystem::path& path);

}  // namespace getnet
