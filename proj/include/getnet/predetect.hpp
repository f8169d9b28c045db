#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "getnet/hsicube.hpp"

namespace getnet {

struct MagnitudeMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  std::size_t pixels() const noexcept { return height * width; }
};

struct PredetectConfig {
  double changed_percentile = 5.0;     // top share of magnitudes treated as changed
  double unchanged_percentile = 60.0;  // bottom share treated as unchanged
  double positive_fraction = 0.10;     // of the changed pool
  std::uint64_t seed = 0;

  void validate() const;
};

struct LabeledSample {
  std::size_t pixel;
  std::uint8_t label;

  bool operator==(const LabeledSample&) const = default;
};

struct LabeledSampleSet {
  std::vector<LabeledSample> samples;
  PredetectConfig config;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// Euclidean norm of the per-pixel spectral difference.
MagnitudeMap cva_magnitude(const CubePair& pair);

/// High-confidence changed/unchanged pixels at a 1:2 ratio. Pools are taken by
/// rank (ties broken by pixel index), then sampled without replacement.
LabeledSampleSet select_pseudo_labels(const MagnitudeMap& magnitude, const PredetectConfig& config);

/// 1 where magnitude > threshold.
BinaryMap cva_change_map(const MagnitudeMap& magnitude, double threshold);

double median_magnitude(const MagnitudeMap& magnitude);

/// CSV `pixel_index,label` preceded by a '#' comment recording config and seed.
void write_samples(const LabeledSampleSet& set, const std::filesystem::path& path);
LabeledSampleSet read_samples(const std::filesystem::path& path);

}  // namespace getnet
