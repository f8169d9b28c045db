#include "getnet/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "getnet/errors.hpp"
#include "getnet/nn/checkpoint.hpp"
#include "getnet/random.hpp"

namespace getnet {

Metrics Metrics::from_counts(std::size_t tp, std::size_t tn, std::size_t fp, std::size_t fn) {
  Metrics r;
  r.tp = tp;
  r.tn = tn;
  r.fp = fp;
  r.fn = fn;
  const double total = static_cast<double>(r.total());
  if (total == 0.0) throw ShapeError("evaluate: empty maps");
  r.oa = static_cast<double>(tp + tn) / total;
  r.p = (static_cast<double>(tp + fp) * static_cast<double>(tp + fn) +
         static_cast<double>(fn + tn) * static_cast<double>(fp + tn)) /
        (total * total);
  if (r.p == 1.0)
    r.kappa = r.oa == 1.0 ? 1.0 : 0.0;
  else
    r.kappa = (r.oa - r.p) / (1.0 - r.p);
  return r;
}

Metrics evaluate(const BinaryMap& prediction, const BinaryMap& truth) {
  if (prediction.height != truth.height || prediction.width != truth.width ||
      prediction.labels.size() != truth.labels.size())
    throw ShapeError("evaluate: prediction is " + std::to_string(prediction.height) + "x" +
                     std::to_string(prediction.width) + " but truth is " + std::to_string(truth.height) + "x" +
                     std::to_string(truth.width));
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.labels.size(); ++i) {
    const bool p = prediction.labels[i] != 0, t = truth.labels[i] != 0;
    tp += p && t;
    tn += !p && !t;
    fp += p && !t;
    fn += !p && t;
  }
  return Metrics::from_counts(tp, tn, fp, fn);
}

std::string format_metrics(const Metrics& m) {
  std::ostringstream out;
  out << std::setprecision(17) << "tp=" << m.tp << ", tn=" << m.tn << ", fp=" << m.fp << ", fn=" << m.fn
      << ", oa=" << m.oa << ", kappa=" << m.kappa;
  return out.str();
}

void write_metrics(const Metrics& metrics, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_metrics(metrics) << "\n";
  if (!out) throw IoError("cannot write " + path.string());
}

template <typename T>
BinaryMap infer(nn::Network<T>& network, const StackedCube& s1, const StackedCube& s2, double eps,
                std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("infer: batch size must be positive");
  if (s1.b != network.b() || s1.m != network.m())
    throw ShapeError("infer: stacked cube has n = " + std::to_string(s1.n()) + " but the network expects n = " +
                     std::to_string(network.n()));
  const StackedPairSource source(s1, s2, eps);
  const std::size_t n = source.side(), area = n * n, pixels = source.pixels();
  BinaryMap map(s1.height, s1.width);
  std::vector<float> buffer(area);
  for (std::size_t start = 0; start < pixels; start += batch_size) {
    const std::size_t count = std::min(batch_size, pixels - start);
    nn::Tensor<T> batch(count, 1, n, n);
    for (std::size_t i = 0; i < count; ++i) {
      source.fill(start + i, buffer);
      std::copy(buffer.begin(), buffer.end(), batch.data.begin() + static_cast<std::ptrdiff_t>(i * area));
    }
    const auto labels = nn::argmax_labels(network.forward(batch, nn::Mode::eval));
    std::copy(labels.begin(), labels.end(), map.labels.begin() + static_cast<std::ptrdiff_t>(start));
  }
  return map;
}

template BinaryMap infer<float>(nn::Network<float>&, const StackedCube&, const StackedCube&, double, std::size_t);
template BinaryMap infer<double>(nn::Network<double>&, const StackedCube&, const StackedCube&, double, std::size_t);

CubePair load_pair(const std::filesystem::path& time1, const std::filesystem::path& time2,
                   const std::vector<std::size_t>& bands) {
  CubePair pair{read_envi(time1), read_envi(time2)};
  if (!bands.empty()) {
    pair.time1 = select_bands(pair.time1, bands);
    pair.time2 = select_bands(pair.time2, bands);
  }
  pair.validate();
  return normalize_pair(pair);
}

UnmixResult unmix_pair(const CubePair& pair, std::size_t m) {
  pair.validate();
  UnmixResult r;
  r.endmembers = atgp(pooled_pixels(pair), m);
  r.linear1 = fcls_cube(r.endmembers, pair.time1);
  r.nonlinear1 = bfm_cube(r.endmembers, pair.time1, &r.linear1);
  r.linear2 = fcls_cube(r.endmembers, pair.time2);
  r.nonlinear2 = bfm_cube(r.endmembers, pair.time2, &r.linear2);
  return r;
}

void write_unmix(const UnmixResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_endmembers(r.endmembers, dir / "endmembers.txt");
  write_envi(r.linear1.to_cube(), dir / "linear1");
  write_envi(r.nonlinear1.to_cube(), dir / "nonlinear1");
  write_envi(r.linear2.to_cube(), dir / "linear2");
  write_envi(r.nonlinear2.to_cube(), dir / "nonlinear2");
}

UnmixResult read_unmix(const std::filesystem::path& dir) {
  UnmixResult r;
  r.endmembers = read_endmembers(dir / "endmembers.txt");
  r.linear1 = AbundanceCube::from_cube(read_envi(dir / "linear1.hdr"), AbundanceKind::linear);
  r.nonlinear1 = AbundanceCube::from_cube(read_envi(dir / "nonlinear1.hdr"), AbundanceKind::nonlinear);
  r.linear2 = AbundanceCube::from_cube(read_envi(dir / "linear2.hdr"), AbundanceKind::linear);
  r.nonlinear2 = AbundanceCube::from_cube(read_envi(dir / "nonlinear2.hdr"), AbundanceKind::nonlinear);
  return r;
}

void RunConfig::validate() const {
  if (m == 0) throw ConfigError("m must be >= 1");
  if (repeats == 0) throw ConfigError("repeats must be >= 1");
  if (!(affinity_eps > 0.0)) throw ConfigError("affinity eps must be positive");
  if (output_dir.empty()) throw ConfigError("output directory must be set");
  predetect.validate();
  train.validate();
  for (const auto* p : {&time1, &time2})
    if (p->empty() || !std::filesystem::exists(*p)) throw IoError("input cube not found: " + p->string());
  if (truth && !std::filesystem::exists(*truth)) throw IoError("ground-truth map not found: " + truth->string());
}

StageSeeds stage_seeds(std::uint64_t seed) { return {sub_seed(seed, 1), sub_seed(seed, 2), sub_seed(seed, 3)}; }

namespace {

class StageRunner {
 public:
  StageRunner(std::ostream* log, std::ofstream& file, RunResult& result) : log_(log), file_(file), result_(result) {}

  template <typename F>
  auto operator()(const std::string& stage, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<std::invoke_result_t<F>>) {
        body();
        finish(stage, start);
      } else {
        auto value = body();
        finish(stage, start);
        return value;
      }
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      emit("[" + stage + "] failed: " + e.what());
      throw StageError(stage, e);
    } catch (const std::exception& e) {
      emit("[" + stage + "] failed: " + e.what());
      throw StageError(stage, Error(e.what()));
    }
  }

  void emit(const std::string& line) {
    if (log_) *log_ << line << std::endl;
    if (file_) file_ << line << std::endl;
  }

 private:
  void finish(const std::string& stage, std::chrono::steady_clock::time_point start) {
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result_.timings.push_back({stage, seconds});
    std::ostringstream line;
    line << "[" << stage << "] " << std::fixed << std::setprecision(3) << seconds << " s";
    emit(line.str());
  }

  std::ostream* log_;
  std::ofstream& file_;
  RunResult& result_;
};

}  // namespace

RunResult run_end_to_end(const RunConfig& config, std::ostream* log) {
  config.validate();
  const auto& dir = config.output_dir;
  std::filesystem::create_directories(dir);
  std::ofstream run_log(dir / "run.log");
  RunResult result;
  StageRunner stage(log, run_log, result);
  const StageSeeds seeds = stage_seeds(config.seed);

  const CubePair pair = stage("load", [&] { return load_pair(config.time1, config.time2, config.bands); });
  const UnmixResult unmixed = stage("unmix", [&] {
    auto r = unmix_pair(pair, config.m);
    write_endmembers(r.endmembers, dir / "endmembers.txt");
    return r;
  });
  const StackedCube s1 = stage("stack", [&] { return stack_sources(pair.time1, unmixed.linear1, unmixed.nonlinear1); });
  const StackedCube s2 = stack_sources(pair.time2, unmixed.linear2, unmixed.nonlinear2);

  const MagnitudeMap magnitude = stage("cva", [&] {
    auto mag = cva_magnitude(pair);
    result.cva_map = cva_change_map(mag, median_magnitude(mag));
    write_map(result.cva_map, dir / "cva_map.pgm");
    return mag;
  });
  const LabeledSampleSet samples = stage("predetect", [&] {
    PredetectConfig pc = config.predetect;
    pc.seed = seeds.predetect;
    auto set = select_pseudo_labels(magnitude, pc);
    write_samples(set, dir / "samples.csv");
    return set;
  });

  std::optional<nn::Network<float>> trained_network;
  nn::AdagradState<float> optimizer;
  stage("train", [&] {
    auto& network =
        trained_network.emplace(s1.b, s1.m, seeds.init, nn::NetworkOptions{config.train.bn_momentum, config.train.bn_eps});
    nn::TrainConfig tc = config.train;
    tc.seed = seeds.train;
    const StackedPairSource source(s1, s2, config.affinity_eps);
    try {
      auto trained = nn::train(network, optimizer, samples, source, tc);
      result.loss_trace = trained.loss_trace;
    } catch (const DivergenceError&) {
      nn::save_checkpoint(network, optimizer, dir / "checkpoint");
      throw;
    }
    nn::write_loss_trace(result.loss_trace, dir / "loss.csv");
    nn::save_checkpoint(network, optimizer, dir / "checkpoint");
  });

  result.change_map = stage("infer", [&] {
    auto map = infer(*trained_network, s1, s2, config.affinity_eps);
    write_map(map, dir / "change_map.pgm");
    return map;
  });

  if (config.truth) {
    stage("evaluate", [&] {
      const BinaryMap truth = read_map(*config.truth, std::make_pair(pair.time1.height, pair.time1.width));
      result.metrics = evaluate(result.change_map, truth);
      result.cva_metrics = evaluate(result.cva_map, truth);
      write_metrics(*result.metrics, dir / "metrics.txt");
      write_metrics(*result.cva_metrics, dir / "cva_metrics.txt");
      stage.emit("network: " + format_metrics(*result.metrics));
      stage.emit("cva:     " + format_metrics(*result.cva_metrics));
    });
  }
  return result;
}

std::vector<RunResult> run_repeated(const RunConfig& config, std::ostream* log) {
  config.validate();
  if (config.repeats == 1) return {run_end_to_end(config, log)};
  std::vector<RunResult> runs;
  for (std::size_t r = 0; r < config.repeats; ++r) {
    RunConfig one = config;
    one.repeats = 1;
    one.seed = sub_seed(config.seed, 100 + r);
    one.output_dir = config.output_dir / ("run_" + std::to_string(r));
    if (log) *log << "== repeat " << r << " (seed " << one.seed << ")" << std::endl;
    runs.push_back(run_end_to_end(one, log));
  }
  if (config.truth) {
    auto summarize = [&](auto field) {
      double mean = 0.0, sq = 0.0;
      for (const auto& run : runs) mean += field(*run.metrics);
      mean /= static_cast<double>(runs.size());
      for (const auto& run : runs) sq += std::pow(field(*run.metrics) - mean, 2);
      return std::make_pair(mean, std::sqrt(sq / static_cast<double>(runs.size() - 1)));
    };
    const auto [oa_mean, oa_std] = summarize([](const Metrics& m) { return m.oa; });
    const auto [kappa_mean, kappa_std] = summarize([](const Metrics& m) { return m.kappa; });
    std::ofstream out(config.output_dir / "summary.txt");
    out << std::setprecision(6) << "runs=" << runs.size() << ", oa_mean=" << oa_mean << ", oa_std=" << oa_std
        << ", kappa_mean=" << kappa_mean << ", kappa_std=" << kappa_std << "\n";
    if (log)
      *log << "summary: oa " << oa_mean << " +- " << oa_std << ", kappa " << kappa_mean << " +- " << kappa_std
           << std::endl;
  }
  return runs;
}

}  // namespace getnet
