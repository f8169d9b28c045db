#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "getnet/hsicube.hpp"
#include "getnet/unmixing.hpp"

namespace getnet {

enum class MixingModel { linear, bilinear };

struct SceneConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t b = 32;
  std::size_t m = 4;
  MixingModel mixing = MixingModel::linear;
  double snr_db = std::numeric_limits<double>::infinity();  // infinity = noiseless
  double change_fraction = 0.2;
  std::uint64_t seed = 0;
  /// Plant one pure pixel per endmember (unchanged at both dates) and keep
  /// every other pixel strictly mixed.
  bool plant_pure_pixels = false;

  void validate() const;
};

struct Scene {
  SceneConfig config;
  CubePair pair;
  BinaryMap truth;
  EndmemberSet endmembers;
  AbundanceCube abundances1;  // true fractions at time 1
  AbundanceCube abundances2;  // true fractions at time 2
  std::vector<std::size_t> pure_pixels;  // planted pixel per endmember, if any
};

/// m smooth positive spectra over b bands, each a sum of 2-4 Gaussian bumps on
/// a small pedestal, peak-normalised to 1, pairwise at least 15 degrees apart.
EndmemberSet gen_endmembers(std::size_t m, std::size_t b, std::uint64_t seed);

/// Two-date scene with elliptical change blobs. Inside a blob each pixel's
/// dominant endmember trades fractions with its weakest endmember at time 2.
Scene gen_scene(const SceneConfig& config);

/// Signal power over noise power, in dB, for a clean/noisy cube pair.
double empirical_snr_db(const HyperCube& clean, const HyperCube& noisy);

/// time1.hdr/.img, time2.hdr/.img, truth.pgm, endmembers.txt, scene.txt.
void write_scene(const Scene& scene, const std::filesystem::path& dir);

}  // namespace getnet
