#include "getnet/affinity.hpp"

#include <cmath>
#include <fstream>

#include "getnet/errors.hpp"

namespace getnet {

void StackedCube::validate() const {
  if (data.size() != pixels() * n()) throw ShapeError("stacked cube data length does not match h*w*(b+2m)");
}

char region_name(Region r) noexcept { return static_cast<char>('A' + static_cast<int>(r)); }

Region RegionLayout::region_of(std::size_t i, std::size_t j) const {
  if (i >= n() || j >= n())
    throw ShapeError("region_of: index (" + std::to_string(i) + ", " + std::to_string(j) +
                     ") outside " + std::to_string(n()) + "x" + std::to_string(n()));
  const bool row_spectral = i < b;
  const bool col_spectral = j < b;
  if (row_spectral && col_spectral) return Region::A;
  if (row_spectral != col_spectral) return Region::C;
  const bool row_linear = i < b + m;
  const bool col_linear = j < b + m;
  if (row_linear && col_linear) return Region::B;
  if (!row_linear && !col_linear) return Region::E;
  return Region::D;
}

StackedCube stack_sources(const HyperCube& cube, const AbundanceCube& linear, const AbundanceCube& nonlinear) {
  cube.validate();
  if (linear.kind != AbundanceKind::linear) throw ShapeError("stack_sources: first abundance cube must be linear");
  if (nonlinear.kind != AbundanceKind::nonlinear)
    throw ShapeError("stack_sources: second abundance cube must be nonlinear");
  if (linear.m < 1 || nonlinear.m < 1) throw ShapeError("stack_sources: abundance cubes need m >= 1");
  if (linear.m != nonlinear.m) throw ShapeError("stack_sources: abundance cubes have different m");
  for (const AbundanceCube* a : {&linear, &nonlinear})
    if (a->height != cube.height || a->width != cube.width || a->data.size() != a->pixels() * a->m)
      throw ShapeError("stack_sources: abundance cube dimensions do not match the image");

  StackedCube out{cube.height, cube.width, cube.bands, linear.m, {}};
  const std::size_t n = out.n();
  out.data.resize(cube.pixels() * n);
  for (std::size_t p = 0; p < cube.pixels(); ++p) {
    double* dst = out.data.data() + p * n;
    for (std::size_t k = 0; k < cube.bands; ++k) dst[k] = cube.data[k * cube.pixels() + p];
    for (std::size_t k = 0; k < out.m; ++k) {
      dst[out.b + k] = linear.at(p, k);
      dst[out.b + out.m + k] = nonlinear.at(p, k);
    }
  }
  return out;
}

template <typename T>
void mixed_affinity_into(std::span<const double> p1, std::span<const double> p2, const RegionLayout& layout,
                         double eps, std::span<T> out) {
  const std::size_t n = layout.n();
  if (p1.size() != n || p2.size() != n)
    throw ShapeError("mixed_affinity: vectors must have length " + std::to_string(n));
  if (out.size() != n * n) throw ShapeError("mixed_affinity: output buffer has wrong size");
  for (std::size_t j = 0; j < n; ++j) {
    double d = p2[j];
    if (std::abs(d) < eps) d = d < 0.0 ? -eps : eps;
    for (std::size_t i = 0; i < n; ++i) {
      const bool c_region = (i < layout.b) != (j < layout.b);
      out[i * n + j] = c_region ? T(0) : static_cast<T>(1.0 - (p1[i] - p2[j]) / d);
    }
  }
}

template void mixed_affinity_into<float>(std::span<const double>, std::span<const double>, const RegionLayout&,
                                         double, std::span<float>);
template void mixed_affinity_into<double>(std::span<const double>, std::span<const double>, const RegionLayout&,
                                          double, std::span<double>);

MixedAffinityMatrix mixed_affinity(std::span<const double> p1, std::span<const double> p2,
                                   const RegionLayout& layout, double eps) {
  MixedAffinityMatrix k{layout, std::vector<double>(layout.n() * layout.n())};
  mixed_affinity_into<double>(p1, p2, layout, eps, k.values);
  return k;
}

std::vector<MixedAffinityMatrix> affinity_batch(const StackedCube& s1, const StackedCube& s2,
                                                std::span<const std::size_t> pixel_indices, double eps) {
  s1.validate();
  s2.validate();
  if (s1.height != s2.height || s1.width != s2.width || s1.b != s2.b || s1.m != s2.m)
    throw ShapeError("affinity_batch: stacked cubes are not congruent");
  const RegionLayout layout{s1.b, s1.m};
  std::vector<MixedAffinityMatrix> out;
  out.reserve(pixel_indices.size());
  for (std::size_t p : pixel_indices) {
    if (p >= s1.pixels())
      throw ShapeError("affinity_batch: pixel index " + std::to_string(p) + " out of range");
    out.push_back(mixed_affinity(s1.pixel(p), s2.pixel(p), layout, eps));
  }
  return out;
}

StackedPairSource::StackedPairSource(const StackedCube& s1, const StackedCube& s2, double eps)
    : s1_(s1), s2_(s2), layout_{s1.b, s1.m}, eps_(eps) {
  s1.validate();
  s2.validate();
  if (s1.height != s2.height || s1.width != s2.width || s1.b != s2.b || s1.m != s2.m)
    throw ShapeError("stacked cubes are not congruent");
}

void StackedPairSource::fill(std::size_t pixel, std::span<float> out) const {
  if (pixel >= s1_.pixels()) throw ShapeError("pixel index " + std::to_string(pixel) + " out of range");
  mixed_affinity_into<float>(s1_.pixel(pixel), s2_.pixel(pixel), layout_, eps_, out);
}

void write_affinity_text(const MixedAffinityMatrix& k, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(9);
  const std::size_t n = k.layout.n();
  out << "# mixed-affinity matrix n=" << n << " b=" << k.layout.b << " m=" << k.layout.m << "\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out << (j ? " " : "") << k(i, j);
    out << "\n";
  }
}

}  // namespace getnet
