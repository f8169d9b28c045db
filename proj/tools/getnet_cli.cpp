// getnet command-line front end. Every subcommand accepts --config FILE with
// flat `key = value` lines named after the long flags; flags given on the
// command line win over the file.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "getnet/errors.hpp"
#include "getnet/nn/checkpoint.hpp"
#include "getnet/pipeline.hpp"
#include "getnet/synthgen.hpp"

namespace fs = std::filesystem;
using namespace getnet;

namespace {

// "0-9,12,20-29" -> {0..9, 12, 20..29}
std::vector<std::size_t> parse_bands(const std::string& text) {
  std::vector<std::size_t> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      const auto dash = item.find('-');
      if (dash == std::string::npos) {
        out.push_back(std::stoul(item));
      } else {
        const std::size_t lo = std::stoul(item.substr(0, dash)), hi = std::stoul(item.substr(dash + 1));
        if (hi < lo) throw ConfigError("bad band range '" + item + "'");
        for (std::size_t b = lo; b <= hi; ++b) out.push_back(b);
      }
    } catch (const std::logic_error&) {
      throw ConfigError("bad band list entry '" + item + "'");
    }
  }
  return out;
}

double parse_snr(const std::string& text) {
  if (text == "inf" || text == "infinity") return std::numeric_limits<double>::infinity();
  try {
    return std::stod(text);
  } catch (const std::logic_error&) {
    throw ConfigError("bad snr-db '" + text + "'");
  }
}

struct Inputs {
  std::string time1, time2, bands;

  void add(CLI::App* app) {
    app->add_option("--time1", time1, "ENVI header of the first date")->required();
    app->add_option("--time2", time2, "ENVI header of the second date")->required();
    app->add_option("--bands", bands, "bands to keep, e.g. 0-9,12 (default: all)");
  }
  CubePair load() const { return load_pair(time1, time2, parse_bands(bands)); }
};

void add_train_options(CLI::App* app, nn::TrainConfig& tc) {
  app->add_option("--steps", tc.steps, "training steps")->capture_default_str();
  app->add_option("--batch-size", tc.batch_size, "minibatch size")->capture_default_str();
  app->add_option("--lr", tc.learning_rate, "Adagrad learning rate")->capture_default_str();
  app->add_option("--adagrad-eps", tc.adagrad_eps, "Adagrad epsilon")->capture_default_str();
  app->add_option("--bn-momentum", tc.bn_momentum, "batch-norm running-statistics momentum")->capture_default_str();
  app->add_option("--bn-eps", tc.bn_eps, "batch-norm variance epsilon")->capture_default_str();
  app->add_option("--log-every", tc.log_every, "loss-trace interval")->capture_default_str();
}

void add_predetect_options(CLI::App* app, PredetectConfig& pc) {
  app->add_option("--changed-percentile", pc.changed_percentile, "top share of CVA magnitudes treated as changed")
      ->capture_default_str();
  app->add_option("--unchanged-percentile", pc.unchanged_percentile,
                  "bottom share of CVA magnitudes treated as unchanged")
      ->capture_default_str();
  app->add_option("--positive-fraction", pc.positive_fraction, "share of the changed pool used as positives")
      ->capture_default_str();
}

template <typename T>
void run_infer(const fs::path& checkpoint, const StackedCube& s1, const StackedCube& s2, double eps,
               const fs::path& out) {
  auto ckpt = nn::load_checkpoint<T>(checkpoint);
  const BinaryMap map = infer(ckpt.network, s1, s2, eps);
  write_map(map, out);
}

template <typename T>
void run_train(const LabeledSampleSet& samples, const StackedCube& s1, const StackedCube& s2, double eps,
               const nn::TrainConfig& tc, std::uint64_t init_seed, const std::optional<fs::path>& resume,
               const fs::path& out) {
  std::optional<nn::Checkpoint<T>> ckpt;
  if (resume)
    ckpt.emplace(nn::load_checkpoint<T>(*resume));
  else
    ckpt.emplace(nn::Checkpoint<T>{nn::Network<T>(s1.b, s1.m, init_seed, {tc.bn_momentum, tc.bn_eps}), {}});
  const StackedPairSource source(s1, s2, eps);
  try {
    const auto result = nn::train(ckpt->network, ckpt->optimizer, samples, source, tc);
    nn::save_checkpoint(ckpt->network, ckpt->optimizer, out);
    nn::write_loss_trace(result.loss_trace, out / "loss.csv");
    std::cout << "final loss " << result.final_loss << "\n";
  } catch (const DivergenceError&) {
    nn::save_checkpoint(ckpt->network, ckpt->optimizer, out);
    throw;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"getnet: hyperspectral change detection with unmixing-fused affinity matrices"};
  app.require_subcommand(1);

  // synth
  SceneConfig scene;
  std::string snr = "inf", mixing = "linear", synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic two-date scene with ground truth");
  synth->set_config("--config");
  synth->add_option("--height", scene.height)->capture_default_str();
  synth->add_option("--width", scene.width)->capture_default_str();
  synth->add_option("--b", scene.b, "band count")->capture_default_str();
  synth->add_option("--m", scene.m, "endmember count")->capture_default_str();
  synth->add_option("--mixing", mixing, "linear or bilinear")->check(CLI::IsMember({"linear", "bilinear"}))
      ->capture_default_str();
  synth->add_option("--snr-db", snr, "noise level in dB, or inf")->capture_default_str();
  synth->add_option("--change-fraction", scene.change_fraction)->capture_default_str();
  synth->add_option("--seed", scene.seed)->capture_default_str();
  synth->add_flag("--pure-pixels", scene.plant_pure_pixels, "plant one pure pixel per endmember");
  synth->add_option("--out", synth_out, "output directory")->required();

  // unmix
  Inputs unmix_in;
  std::size_t unmix_m = 4;
  std::string unmix_out;
  auto* unmix = app.add_subcommand("unmix", "shared endmembers + linear and bilinear abundances for both dates");
  unmix->set_config("--config");
  unmix_in.add(unmix);
  unmix->add_option("--m", unmix_m, "endmember count")->capture_default_str();
  unmix->add_option("--out", unmix_out, "output directory")->required();

  // predetect
  Inputs pre_in;
  PredetectConfig pre_cfg;
  std::string pre_out;
  auto* predetect = app.add_subcommand("predetect", "CVA pre-detection and pseudo-label selection");
  predetect->set_config("--config");
  pre_in.add(predetect);
  add_predetect_options(predetect, pre_cfg);
  predetect->add_option("--seed", pre_cfg.seed)->capture_default_str();
  predetect->add_option("--out", pre_out, "output directory (samples.csv, cva_map.pgm)")->required();

  // train
  Inputs train_in;
  nn::TrainConfig train_cfg;
  std::string train_unmixed, train_samples, train_out, train_resume, precision = "float32";
  std::uint64_t init_seed = 0;
  double train_eps = kAffinityEps;
  auto* train = app.add_subcommand("train", "train the network on pseudo-labelled pixels");
  train->set_config("--config");
  train_in.add(train);
  train->add_option("--unmixed", train_unmixed, "directory written by `unmix`")->required();
  train->add_option("--samples", train_samples, "samples.csv written by `predetect`")->required();
  add_train_options(train, train_cfg);
  train->add_option("--seed", train_cfg.seed, "minibatch sampling seed")->capture_default_str();
  train->add_option("--init-seed", init_seed, "weight initialisation seed")->capture_default_str();
  train->add_option("--affinity-eps", train_eps)->capture_default_str();
  train->add_option("--precision", precision)->check(CLI::IsMember({"float32", "float64"}))->capture_default_str();
  train->add_option("--resume", train_resume, "continue from this checkpoint");
  train->add_option("--out", train_out, "checkpoint directory")->required();

  // infer
  Inputs infer_in;
  std::string infer_unmixed, infer_ckpt, infer_out;
  double infer_eps = kAffinityEps;
  std::optional<std::size_t> dump_pixel;
  auto* infer_cmd = app.add_subcommand("infer", "change map from a trained checkpoint");
  infer_cmd->set_config("--config");
  infer_in.add(infer_cmd);
  infer_cmd->add_option("--unmixed", infer_unmixed, "directory written by `unmix`")->required();
  infer_cmd->add_option("--checkpoint", infer_ckpt)->required();
  infer_cmd->add_option("--affinity-eps", infer_eps)->capture_default_str();
  infer_cmd->add_option("--dump-affinity", dump_pixel, "also write the affinity matrix of this pixel index");
  infer_cmd->add_option("--out", infer_out, "change map (PGM)")->required();

  // evaluate
  std::string eval_pred, eval_truth, eval_out;
  auto* eval = app.add_subcommand("evaluate", "confusion matrix, OA and Kappa");
  eval->set_config("--config");
  eval->add_option("--pred", eval_pred, "predicted change map (PGM)")->required();
  eval->add_option("--truth", eval_truth, "ground-truth map (PGM)")->required();
  eval->add_option("--out", eval_out, "also write the metrics line here");

  // run
  Inputs run_in;
  RunConfig run_cfg;
  std::string run_truth, run_out = run_cfg.output_dir.string();
  auto* run = app.add_subcommand("run", "full pipeline: unmix, fuse, pre-detect, train, infer, evaluate");
  run->set_config("--config");
  run_in.add(run);
  run->add_option("--truth", run_truth, "ground-truth map; enables evaluation");
  run->add_option("--m", run_cfg.m, "endmember count")->capture_default_str();
  add_predetect_options(run, run_cfg.predetect);
  add_train_options(run, run_cfg.train);
  run->add_option("--affinity-eps", run_cfg.affinity_eps)->capture_default_str();
  run->add_option("--seed", run_cfg.seed)->capture_default_str();
  run->add_option("--repeats", run_cfg.repeats, "independent runs with derived seeds")->capture_default_str();
  run->add_option("--out", run_out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      scene.snr_db = parse_snr(snr);
      scene.mixing = mixing == "linear" ? MixingModel::linear : MixingModel::bilinear;
      const Scene s = gen_scene(scene);
      write_scene(s, synth_out);
      std::cout << "scene written to " << synth_out << "\n";
    } else if (*unmix) {
      const UnmixResult r = unmix_pair(unmix_in.load(), unmix_m);
      write_unmix(r, unmix_out);
      std::cout << "endmember pixels:";
      for (auto i : r.endmembers.source_indices) std::cout << " " << i;
      std::cout << "\n";
    } else if (*predetect) {
      const MagnitudeMap mag = cva_magnitude(pre_in.load());
      const LabeledSampleSet set = select_pseudo_labels(mag, pre_cfg);
      fs::create_directories(pre_out);
      write_samples(set, fs::path(pre_out) / "samples.csv");
      write_map(cva_change_map(mag, median_magnitude(mag)), fs::path(pre_out) / "cva_map.pgm");
      std::cout << set.positives << " positives, " << set.negatives << " negatives\n";
    } else if (*train || *infer_cmd) {
      const bool training = train->parsed();
      const Inputs& in = training ? train_in : infer_in;
      const CubePair pair = in.load();
      const UnmixResult u = read_unmix(training ? train_unmixed : infer_unmixed);
      const StackedCube s1 = stack_sources(pair.time1, u.linear1, u.nonlinear1);
      const StackedCube s2 = stack_sources(pair.time2, u.linear2, u.nonlinear2);
      if (training) {
        const LabeledSampleSet samples = read_samples(train_samples);
        const std::optional<fs::path> resume = train_resume.empty() ? std::nullopt : std::optional<fs::path>(train_resume);
        const std::string prec = resume ? nn::checkpoint_precision(*resume) : precision;
        if (prec == "float64")
          run_train<double>(samples, s1, s2, train_eps, train_cfg, init_seed, resume, train_out);
        else
          run_train<float>(samples, s1, s2, train_eps, train_cfg, init_seed, resume, train_out);
      } else {
        if (nn::checkpoint_precision(infer_ckpt) == "float64")
          run_infer<double>(infer_ckpt, s1, s2, infer_eps, infer_out);
        else
          run_infer<float>(infer_ckpt, s1, s2, infer_eps, infer_out);
        if (dump_pixel) {
          if (*dump_pixel >= s1.pixels()) throw ConfigError("--dump-affinity pixel index out of range");
          const auto k = mixed_affinity(s1.pixel(*dump_pixel), s2.pixel(*dump_pixel), {s1.b, s1.m}, infer_eps);
          write_affinity_text(k, fs::path(infer_out).replace_extension(".affinity.txt"));
        }
      }
    } else if (*eval) {
      const BinaryMap truth = read_map(eval_truth);
      const BinaryMap pred = read_map(eval_pred, std::make_pair(truth.height, truth.width));
      const Metrics m = evaluate(pred, truth);
      std::cout << format_metrics(m) << "\n";
      if (!eval_out.empty()) write_metrics(m, eval_out);
    } else if (*run) {
      run_cfg.time1 = run_in.time1;
      run_cfg.time2 = run_in.time2;
      run_cfg.bands = parse_bands(run_in.bands);
      if (!run_truth.empty()) run_cfg.truth = run_truth;
      run_cfg.output_dir = run_out;
      const auto runs = run_repeated(run_cfg, &std::cerr);
      if (runs.size() == 1 && runs.front().metrics) std::cout << format_metrics(*runs.front().metrics) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
