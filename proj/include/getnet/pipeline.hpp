#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "getnet/affinity.hpp"
#include "getnet/hsicube.hpp"
#include "getnet/nn/network.hpp"
#include "getnet/nn/train.hpp"
#include "getnet/predetect.hpp"
#include "getnet/unmixing.hpp"

namespace getnet {

struct Metrics {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  double oa = 0.0;
  double kappa = 0.0;
  double p = 0.0;  // chance agreement

  std::size_t total() const noexcept { return tp + tn + fp + fn; }
  /// OA, P and Kappa from the four counts. Kappa is 1 when P = 1 and OA = 1,
  /// 0 when P = 1 otherwise.
  static Metrics from_counts(std::size_t tp, std::size_t tn, std::size_t fp, std::size_t fn);
};

Metrics evaluate(const BinaryMap& prediction, const BinaryMap& truth);

/// `tp=.., tn=.., fp=.., fn=.., oa=.., kappa=..`
std::string format_metrics(const Metrics& metrics);
void write_metrics(const Metrics& metrics, const std::filesystem::path& path);

inline constexpr std::size_t kInferBatch = 96;

/// Per-pixel affinity -> eval-mode forward -> argmax, in batches.
template <typename T>
BinaryMap infer(nn::Network<T>& network, const StackedCube& s1, const StackedCube& s2,
                double eps = kAffinityEps, std::size_t batch_size = kInferBatch);

/// Read both dates, keep the listed bands (all when empty), normalise jointly.
CubePair load_pair(const std::filesystem::path& time1, const std::filesystem::path& time2,
                   const std::vector<std::size_t>& bands);

/// Shared endmembers from the pooled pixels of both dates, then linear and
/// bilinear abundances per date.
struct UnmixResult {
  EndmemberSet endmembers;
  AbundanceCube linear1, nonlinear1, linear2, nonlinear2;
};
UnmixResult unmix_pair(const CubePair& pair, std::size_t m);

/// endmembers.txt plus four abundance cubes in ENVI form.
void write_unmix(const UnmixResult& result, const std::filesystem::path& dir);
UnmixResult read_unmix(const std::filesystem::path& dir);

struct RunConfig {
  std::filesystem::path time1;
  std::filesystem::path time2;
  std::optional<std::filesystem::path> truth;
  std::vector<std::size_t> bands;  // empty keeps every band
  std::filesystem::path output_dir = "getnet_out";
  std::size_t m = 4;
  PredetectConfig predetect;
  nn::TrainConfig train;
  double affinity_eps = kAffinityEps;
  std::uint64_t seed = 0;
  std::size_t repeats = 1;

  /// Checks values and that the input paths exist.
  void validate() const;
};

struct StageTiming {
  std::string stage;
  double seconds;
};

struct RunResult {
  BinaryMap change_map;
  BinaryMap cva_map;  // CVA at the median magnitude
  std::optional<Metrics> metrics;
  std::optional<Metrics> cva_metrics;
  std::vector<nn::LossPoint> loss_trace;
  std::vector<StageTiming> timings;
};

/// Stage seeds derived from the run seed.
struct StageSeeds {
  std::uint64_t predetect, train, init;
};
StageSeeds stage_seeds(std::uint64_t seed);

/// Full pipeline for one seed. Artifacts (change_map.pgm, cva_map.pgm,
/// metrics.txt, loss.csv, samples.csv, checkpoint/, endmembers.txt, run.log)
/// land in config.output_dir, and stay there if a stage fails. Errors are
/// rethrown as StageError naming the stage. The ground-truth map is opened
/// only in the final evaluate stage.
RunResult run_end_to_end(const RunConfig& config, std::ostream* log = nullptr);

/// `repeats` runs with seeds derived from config.seed, each in its own
/// subdirectory (run_0, run_1, ...); writes summary.txt with mean and standard
/// deviation of OA and Kappa when ground truth is available.
std::vector<RunResult> run_repeated(const RunConfig& config, std::ostream* log = nullptr);

}  // namespace getnet
