#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bpvae/data.hpp"
#include "bpvae/tape.hpp"
#include "bpvae/tensor.hpp"

namespace bpvae::models {

inline constexpr float kLogVarMin = -10.0f;
inline constexpr float kLogVarMax = 10.0f;

enum class PriorRole { kBasic, kSimple };

// Zero-mean isotropic Gaussian prior N(0, sigma^2 I).
struct PriorSpec {
  float sigma = 1.0f;
  PriorRole role = PriorRole::kBasic;
};

// Diagonal Gaussian q(z|x); both tensors are [batch, latent_dim] and
// log_var is already clamped to [kLogVarMin, kLogVarMax].
struct GaussianPosterior {
  Tensor mu;
  Tensor log_var;
};

// Encoder: two stride-2 "same" convolutions with LeakyReLU, then a dense
// layer to (mu, log_var). Decoder mirrors it with a dense layer and two
// stride-2 transposed convolutions ending in a sigmoid.
struct Architecture {
  std::size_t image_side = data::kImageSide;  // must be divisible by 4
  std::size_t channels1 = 32;
  std::size_t channels2 = 64;
  std::size_t kernel = 4;
  std::size_t latent_dim = 32;
  float leaky_slope = 0.01f;

  std::size_t feature_side() const { return image_side / 4; }
  std::size_t feature_count() const { return channels2 * feature_side() * feature_side(); }
  void validate() const;
};

struct ParameterSpec {
  std::string name;
  Shape shape;
};

// Names and shapes of every parameter, in storage order.
std::vector<ParameterSpec> parameter_layout(const Architecture& arch);

// Encoder and decoder weights shared by every branch of a model.
class Network {
 public:
  Network(Architecture arch, std::vector<Tensor> params);

  // Uniform Glorot initialization, zero biases.
  static Network initialize(const Architecture& arch, std::uint64_t seed);

  const Architecture& architecture() const noexcept { return arch_; }
  std::span<Tensor> parameters() noexcept { return params_; }
  std::span<const Tensor> parameters() const noexcept { return params_; }
  const Tensor& parameter(std::size_t index) const { return params_.at(index); }
  std::size_t parameter_count() const;

  Network clone() const;

 private:
  Architecture arch_;
  std::vector<Tensor> params_;
};

// Which prior the simple branches' KL term is measured against. The default
// uses each simple branch's own prior; kBasicPrior reproduces the variant in
// which every branch is regularized toward the basic prior.
enum class SimpleKlTarget { kSimplePrior, kBasicPrior };

// A plain VAE when simple_priors is empty, otherwise a BPVAE with one simple
// prior per auxiliary dataset.
struct Model {
  Network network;
  PriorSpec basic_prior;
  std::vector<PriorSpec> simple_priors;
  SimpleKlTarget simple_kl = SimpleKlTarget::kSimplePrior;

  bool is_bpvae() const noexcept { return !simple_priors.empty(); }
  const PriorSpec& branch_kl_prior(std::size_t simple_index) const;
};

// Throws ConfigError unless every sigma is positive and every simple sigma is
// strictly below the basic sigma.
void validate_priors(const PriorSpec& basic, std::span<const PriorSpec> simples);

Model make_vae(const Architecture& arch, float basic_sigma, std::uint64_t seed);
Model make_bpvae(const Architecture& arch, float basic_sigma,
                 std::span<const float> simple_sigmas, std::uint64_t seed,
                 SimpleKlTarget simple_kl = SimpleKlTarget::kSimplePrior);

// ---------------------------------------------------------------------------
// Forward pieces. `images` are [N, 1, S, S]; noise is [N, latent_dim].

GaussianPosterior encode(Tape& tape, const Network& net, const Tensor& images);
Tensor decode(Tape& tape, const Network& net, const Tensor& codes);

// z = mu + exp(0.5 log_var) * noise
Tensor reparameterize(Tape& tape, const GaussianPosterior& posterior, const Tensor& noise);

// Per-sample KL(q || N(0, s^2 I)) = sum_i log(s / sigma_i)
//   + (sigma_i^2 + mu_i^2) / (2 s^2) - 1/2, shape [N].
Tensor kl_to_prior(Tape& tape, const GaussianPosterior& posterior, const PriorSpec& prior);

// Per-sample Bernoulli log-likelihood sum_p x log p + (1 - x) log(1 - p),
// with p effectively clamped to [1e-7, 1 - 1e-7]. Shape [N].
Tensor reconstruction_loglik(Tape& tape, const Tensor& images, const Tensor& decoded);

// Single-sample ELBO per datum, shape [N].
Tensor elbo(Tape& tape, const Network& net, const PriorSpec& prior, const Tensor& images,
            const Tensor& noise);

// -mean_n [ sum_b elbo_b(batch_b[n]) ] where branch b's KL is measured
// against kl_priors[b]. No prior-ordering checks.
Tensor joint_negative_elbo(Tape& tape, const Network& net, std::span<const PriorSpec> kl_priors,
                           std::span<const Tensor> batches, std::span<const Tensor> noises);

// Joint loss: the basic batch under the basic prior plus one simple batch per
// simple prior. With no simple batches this is the plain negative ELBO.
Tensor bpvae_loss(Tape& tape, const Model& model, const Tensor& basic_batch,
                  std::span<const Tensor> simple_batches, std::span<const Tensor> noises);

// Decoder probabilities for the reparameterized codes, same shape as `images`.
Tensor reconstruct(Tape& tape, const Network& net, const Tensor& images, const Tensor& noise);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  std::size_t epochs = 200;
  float learning_rate = 1e-4f;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  // Called after every epoch with (epoch index, mean loss).
  std::function<void(std::size_t, double)> on_epoch;
};

struct TrainResult {
  std::vector<double> epoch_losses;
};

// Adam on bpvae_loss. Each step draws a basic batch and one equally sized
// batch from every simple dataset; an epoch is one pass over the largest
// dataset and smaller datasets cycle. Throws DivergenceError with the epoch
// index on a non-finite loss.
TrainResult train(Model& model, const data::ImageDataset& basic,
                  std::span<const data::ImageDataset> simples, const TrainConfig& config);

// Standard-normal noise for a batch, deterministic in (seed, stream).
Tensor gaussian_noise(std::size_t batch, std::size_t latent_dim, std::uint64_t seed,
                      std::uint64_t stream);

}  // namespace bpvae::models
