#include <algorithm>
#include <cmath>
#include <sstream>

#include "bpvae/adam.hpp"
#include "bpvae/error.hpp"
#include "bpvae/model.hpp"
#include "bpvae/random.hpp"

namespace bpvae::models {
namespace {
constexpr std::uint64_t kSamplerStream = 0x5a17;
constexpr std::uint64_t kNoiseStream = 0x7015e;
}  // namespace

TrainResult train(Model& model, const data::ImageDataset& basic,
                  std::span<const data::ImageDataset> simples, const TrainConfig& config) {
  if (simples.size() != model.simple_priors.size()) {
    throw ConfigError("train: " + std::to_string(simples.size()) + " simple datasets for " +
                      std::to_string(model.simple_priors.size()) + " simple priors");
  }
  if (config.batch_size == 0) throw ConfigError("train: batch_size must be positive");
  if (!(config.learning_rate > 0.0f)) throw ConfigError("train: learning_rate must be positive");
  if (model.network.architecture().image_side != data::kImageSide) {
    throw ConfigError("train: datasets are 32x32 but the network expects " +
                      std::to_string(model.network.architecture().image_side));
  }
  validate_priors(model.basic_prior, model.simple_priors);

  std::vector<const data::ImageDataset*> sets{&basic};
  for (const auto& s : simples) sets.push_back(&s);
  std::size_t largest = 0;
  std::vector<data::CyclicSampler> samplers;
  for (std::size_t b = 0; b < sets.size(); ++b) {
    largest = std::max(largest, sets[b]->size());
    samplers.emplace_back(sets[b]->size(), derive_seed(config.seed, kSamplerStream + b));
  }

  auto params = model.network.parameters();
  AdamState adam = make_adam_state(params, AdamOptions{config.learning_rate});
  const std::size_t latent = model.network.architecture().latent_dim;
  const std::uint64_t noise_seed = derive_seed(config.seed, kNoiseStream);

  TrainResult result;
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double weighted = 0.0;
    for (std::size_t start = 0; start < largest; start += config.batch_size, ++step) {
      const std::size_t n = std::min(config.batch_size, largest - start);
      std::vector<Tensor> batches;
      std::vector<Tensor> noises;
      for (std::size_t b = 0; b < sets.size(); ++b) {
        batches.push_back(sets[b]->batch(samplers[b].next(n)));
        noises.push_back(gaussian_noise(n, latent, noise_seed, step * sets.size() + b));
      }
      Tape tape;
      Tensor loss = bpvae_loss(tape, model, batches.front(),
                               std::span<const Tensor>(batches).subspan(1), noises);
      const float value = loss.item();
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "train: non-finite loss " << value << " in epoch " << epoch;
        throw DivergenceError(epoch, msg.str());
      }
      tape.backward(loss);
      adam_step(params, adam);
      zero_grads(params);
      weighted += static_cast<double>(value) * static_cast<double>(n);
    }
    const double mean_loss = weighted / static_cast<double>(largest);
    result.epoch_losses.push_back(mean_loss);
    if (config.on_epoch) config.on_epoch(epoch, mean_loss);
  }
  return result;
}

}  // namespace bpvae::models
