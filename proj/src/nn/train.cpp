#include "getnet/nn/train.hpp"

#include <cmath>
#include <fstream>

#include "getnet/errors.hpp"
#include "getnet/random.hpp"

namespace getnet::nn {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (steps == 0) throw ConfigError("steps must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
  if (!(adagrad_eps > 0.0)) throw ConfigError("adagrad_eps must be positive");
  if (!(bn_momentum > 0.0 && bn_momentum < 1.0)) throw ConfigError("bn_momentum must be in (0, 1)");
  if (!(bn_eps > 0.0)) throw ConfigError("bn_eps must be positive");
  if (log_every == 0) throw ConfigError("log_every must be positive");
}

template <typename T>
TrainResult train(Network<T>& network, AdagradState<T>& optimizer, const LabeledSampleSet& samples,
                  const AffinitySource& source, const TrainConfig& config) {
  config.validate();
  if (samples.samples.empty()) throw ConfigError("training needs at least one labelled sample");
  std::size_t positives = 0;
  for (const auto& s : samples.samples) positives += s.label;
  const std::size_t negatives = samples.samples.size() - positives;
  if (negatives != 2 * positives)
    throw ConfigError("training samples must be 1:2 positive:negative (got " + std::to_string(positives) + ":" +
                      std::to_string(negatives) + ")");
  const std::size_t n = network.n();
  if (source.side() != n)
    throw ShapeError("affinity source side " + std::to_string(source.side()) + " does not match network n = " +
                     std::to_string(n));

  network.set_options({config.bn_momentum, config.bn_eps});
  auto params = network.parameters();
  if (optimizer.accumulators.empty()) optimizer = AdagradState<T>::zeros_like(params);

  const std::size_t count = samples.samples.size();
  const std::size_t area = n * n;
  std::vector<T> inputs(count * area);
  {
    std::vector<float> buffer(area);
    for (std::size_t i = 0; i < count; ++i) {
      source.fill(samples.samples[i].pixel, buffer);
      for (std::size_t k = 0; k < area; ++k) inputs[i * area + k] = static_cast<T>(buffer[k]);
    }
  }

  Rng rng(config.seed);
  TrainResult result;
  std::vector<std::size_t> draws(count);
  for (std::size_t step = 1; step <= config.steps; ++step) {
    std::fill(draws.begin(), draws.end(), 0);
    for (std::size_t i = 0; i < config.batch_size; ++i) ++draws[uniform_index(rng, count)];

    std::size_t unique = 0;
    for (std::size_t d : draws) unique += d > 0;
    Tensor<T> batch(unique, 1, n, n);
    std::vector<T> multiplicity;
    std::vector<std::uint8_t> labels;
    multiplicity.reserve(unique);
    labels.reserve(unique);
    for (std::size_t i = 0, slot = 0; i < count; ++i) {
      if (draws[i] == 0) continue;
      std::copy_n(inputs.begin() + static_cast<std::ptrdiff_t>(i * area), area,
                  batch.data.begin() + static_cast<std::ptrdiff_t>(slot * area));
      multiplicity.push_back(static_cast<T>(draws[i]));
      labels.push_back(samples.samples[i].label);
      ++slot;
    }

    // Running statistics change during the forward pass; keep them so a
    // diverged step can be rolled back.
    std::vector<std::vector<T>> saved_buffers;
    for (const Buffer<T>* b : network.buffers()) saved_buffers.push_back(b->value);
    auto roll_back = [&] {
      auto buffers = network.buffers();
      for (std::size_t i = 0; i < buffers.size(); ++i) buffers[i]->value = saved_buffers[i];
    };

    const Tensor<T> logits = network.forward(batch, Mode::train, multiplicity);
    const LossResult<T> loss = softmax_cross_entropy<T>(logits, labels, multiplicity);
    if (!std::isfinite(loss.loss)) {
      roll_back();
      throw DivergenceError("training diverged: non-finite loss at step " + std::to_string(step), step);
    }
    network.backward(loss.grad);
    for (const Param<T>* p : params)
      for (T g : p->grad)
        if (!std::isfinite(g)) {
          roll_back();
          throw DivergenceError("training diverged: non-finite gradient in " + p->name + " at step " +
                                    std::to_string(step),
                                step);
        }
    adagrad_step<T>(params, optimizer, config.learning_rate, config.adagrad_eps);

    result.final_loss = loss.loss;
    if (step == 1 || step % config.log_every == 0 || step == config.steps) result.loss_trace.push_back({step, loss.loss});
  }
  return result;
}

void write_loss_trace(const std::vector<LossPoint>& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(9);
  out << "step,loss\n";
  for (const auto& p : trace) out << p.step << "," << p.loss << "\n";
  if (!out) throw IoError("cannot write " + path.string());
}

template TrainResult train<float>(Network<float>&, AdagradState<float>&, const LabeledSampleSet&,
                                  const AffinitySource&, const TrainConfig&);
template TrainResult train<double>(Network<double>&, AdagradState<double>&, const LabeledSampleSet&,
                                   const AffinitySource&, const TrainConfig&);

}  // namespace getnet::nn
