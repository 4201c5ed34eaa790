#include "bpvae/model.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "bpvae/error.hpp"
#include "bpvae/ops.hpp"
#include "bpvae/random.hpp"

namespace bpvae::models {
namespace {

enum ParamIndex : std::size_t {
  kEncConv1W,
  kEncConv1B,
  kEncConv2W,
  kEncConv2B,
  kEncFcW,
  kEncFcB,
  kDecFcW,
  kDecFcB,
  kDecDeconv1W,
  kDecDeconv1B,
  kDecDeconv2W,
  kDecDeconv2B,
  kParamCount
};

std::size_t glorot_fan_sum(const ParameterSpec& spec) {
  const Shape& s = spec.shape;
  if (s.size() == 2) return s[0] + s[1];
  const std::size_t receptive = s[2] * s[3];
  return (s[0] + s[1]) * receptive;
}

}  // namespace

void Architecture::validate() const {
  if (image_side < 4 || image_side % 4 != 0) {
    throw ConfigError("architecture: image side must be a positive multiple of 4");
  }
  if (kernel < 2 || kernel % 2 != 0) {
    throw ConfigError("architecture: kernel must be even and at least 2");
  }
  if (channels1 == 0 || channels2 == 0 || latent_dim == 0) {
    throw ConfigError("architecture: channel counts and latent_dim must be positive");
  }
  if (!(leaky_slope >= 0.0f && leaky_slope < 1.0f)) {
    throw ConfigError("architecture: leaky slope must lie in [0, 1)");
  }
}

std::vector<ParameterSpec> parameter_layout(const Architecture& arch) {
  arch.validate();
  const std::size_t k = arch.kernel;
  const std::size_t f = arch.feature_count();
  const std::size_t l = arch.latent_dim;
  return {
      {"enc.conv1.weight", {arch.channels1, 1, k, k}},
      {"enc.conv1.bias", {arch.channels1}},
      {"enc.conv2.weight", {arch.channels2, arch.channels1, k, k}},
      {"enc.conv2.bias", {arch.channels2}},
      {"enc.fc.weight", {f, 2 * l}},
      {"enc.fc.bias", {2 * l}},
      {"dec.fc.weight", {l, f}},
      {"dec.fc.bias", {f}},
      {"dec.deconv1.weight", {arch.channels2, arch.channels1, k, k}},
      {"dec.deconv1.bias", {arch.channels1}},
      {"dec.deconv2.weight", {arch.channels1, 1, k, k}},
      {"dec.deconv2.bias", {1}},
  };
}

Network::Network(Architecture arch, std::vector<Tensor> params)
    : arch_(arch), params_(std::move(params)) {
  const auto layout = parameter_layout(arch_);
  if (params_.size() != layout.size()) {
    throw ShapeError("network: expected " + std::to_string(layout.size()) +
                     " parameter tensors, got " + std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (params_[i].shape() != layout[i].shape) {
      throw ShapeError("network: " + layout[i].name + " has shape " +
                       shape_to_string(params_[i].shape()) + ", expected " +
                       shape_to_string(layout[i].shape));
    }
    params_[i].set_requires_grad(true);
  }
}

Network Network::initialize(const Architecture& arch, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x1417));
  std::vector<Tensor> params;
  for (const auto& spec : parameter_layout(arch)) {
    std::vector<float> values(shape_numel(spec.shape), 0.0f);
    if (spec.shape.size() > 1) {
      const auto bound =
          static_cast<float>(std::sqrt(6.0 / static_cast<double>(glorot_fan_sum(spec))));
      std::uniform_real_distribution<float> uniform(-bound, bound);
      for (auto& v : values) v = uniform(rng);
    }
    params.emplace_back(spec.shape, std::move(values), true);
  }
  return Network(arch, std::move(params));
}

std::size_t Network::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.numel();
  return total;
}

Network Network::clone() const {
  std::vector<Tensor> copies;
  for (const auto& p : params_) {
    Tensor c(p.shape(), std::vector<float>(p.data().begin(), p.data().end()), true);
    copies.push_back(std::move(c));
  }
  return Network(arch_, std::move(copies));
}

const PriorSpec& Model::branch_kl_prior(std::size_t simple_index) const {
  if (simple_kl == SimpleKlTarget::kBasicPrior) return basic_prior;
  return simple_priors.at(simple_index);
}

void validate_priors(const PriorSpec& basic, std::span<const PriorSpec> simples) {
  if (!(basic.sigma > 0.0f) || !std::isfinite(basic.sigma)) {
    throw ConfigError("priors: basic sigma must be positive and finite");
  }
  for (std::size_t i = 0; i < simples.size(); ++i) {
    const float s = simples[i].sigma;
    if (!(s > 0.0f) || !std::isfinite(s)) {
      throw ConfigError("priors: simple sigma " + std::to_string(i) + " must be positive");
    }
    if (!(s < basic.sigma)) {
      throw ConfigError("priors: simple sigma " + std::to_string(s) +
                        " must be strictly below basic sigma " + std::to_string(basic.sigma));
    }
  }
}

Model make_vae(const Architecture& arch, float basic_sigma, std::uint64_t seed) {
  PriorSpec basic{basic_sigma, PriorRole::kBasic};
  validate_priors(basic, {});
  return Model{Network::initialize(arch, seed), basic, {}, SimpleKlTarget::kSimplePrior};
}

Model make_bpvae(const Architecture& arch, float basic_sigma,
                 std::span<const float> simple_sigmas, std::uint64_t seed,
                 SimpleKlTarget simple_kl) {
  if (simple_sigmas.empty()) throw ConfigError("bpvae: at least one simple prior is required");
  PriorSpec basic{basic_sigma, PriorRole::kBasic};
  std::vector<PriorSpec> simples;
  for (float s : simple_sigmas) simples.push_back({s, PriorRole::kSimple});
  validate_priors(basic, simples);
  return Model{Network::initialize(arch, seed), basic, std::move(simples), simple_kl};
}

GaussianPosterior encode(Tape& tape, const Network& net, const Tensor& images) {
  const auto& arch = net.architecture();
  if (images.rank() != 4 || images.dim(1) != 1 || images.dim(2) != arch.image_side ||
      images.dim(3) != arch.image_side) {
    throw ShapeError("encode: expected [N, 1, " + std::to_string(arch.image_side) + ", " +
                     std::to_string(arch.image_side) + "], got " +
                     shape_to_string(images.shape()));
  }
  const std::size_t n = images.dim(0);
  const ops::Conv2dOptions down{2, ops::Padding::kSame};
  Tensor h = ops::conv2d(tape, images, net.parameter(kEncConv1W), net.parameter(kEncConv1B), down);
  h = ops::leaky_relu(tape, h, arch.leaky_slope);
  h = ops::conv2d(tape, h, net.parameter(kEncConv2W), net.parameter(kEncConv2B), down);
  h = ops::leaky_relu(tape, h, arch.leaky_slope);
  h = ops::reshape(tape, h, {n, arch.feature_count()});
  Tensor out = ops::add(tape, ops::matmul(tape, h, net.parameter(kEncFcW)), net.parameter(kEncFcB));
  Tensor mu = ops::slice(tape, out, 1, 0, arch.latent_dim);
  Tensor log_var = ops::slice(tape, out, 1, arch.latent_dim, arch.latent_dim);
  log_var = ops::clamp(tape, log_var, kLogVarMin, kLogVarMax);
  return {mu, log_var};
}

Tensor decode(Tape& tape, const Network& net, const Tensor& codes) {
  const auto& arch = net.architecture();
  if (codes.rank() != 2 || codes.dim(1) != arch.latent_dim) {
    throw ShapeError("decode: expected [N, " + std::to_string(arch.latent_dim) + "], got " +
                     shape_to_string(codes.shape()));
  }
  const std::size_t n = codes.dim(0);
  const ops::ConvTranspose2dOptions up{2, (arch.kernel - 2) / 2};
  Tensor h = ops::add(tape, ops::matmul(tape, codes, net.parameter(kDecFcW)), net.parameter(kDecFcB));
  h = ops::leaky_relu(tape, h, arch.leaky_slope);
  h = ops::reshape(tape, h, {n, arch.channels2, arch.feature_side(), arch.feature_side()});
  h = ops::conv_transpose2d(tape, h, net.parameter(kDecDeconv1W), net.parameter(kDecDeconv1B), up);
  h = ops::leaky_relu(tape, h, arch.leaky_slope);
  h = ops::conv_transpose2d(tape, h, net.parameter(kDecDeconv2W), net.parameter(kDecDeconv2B), up);
  return ops::sigmoid(tape, h);
}

Tensor reparameterize(Tape& tape, const GaussianPosterior& posterior, const Tensor& noise) {
  if (noise.shape() != posterior.mu.shape()) {
    throw ShapeError("reparameterize: noise " + shape_to_string(noise.shape()) +
                     " does not match posterior " + shape_to_string(posterior.mu.shape()));
  }
  Tensor sigma = ops::exp(tape, ops::mul_scalar(tape, posterior.log_var, 0.5f));
  return ops::add(tape, posterior.mu, ops::mul(tape, sigma, noise));
}

Tensor kl_to_prior(Tape& tape, const GaussianPosterior& posterior, const PriorSpec& prior) {
  if (!(prior.sigma > 0.0f)) throw ConfigError("kl_to_prior: prior sigma must be positive");
  // Per dimension: 0.5 (r - 1 - log r) + mu^2 / (2 s^2) with r = sigma^2 / s^2;
  // clamped at zero against float cancellation near r = 1.
  const float log_s2 = 2.0f * std::log(prior.sigma);
  const float inv_2s2 = 0.5f / (prior.sigma * prior.sigma);
  Tensor u = ops::add_scalar(tape, posterior.log_var, -log_s2);
  Tensor ratio_term = ops::sub(tape, ops::exp(tape, u), ops::add_scalar(tape, u, 1.0f));
  ratio_term = ops::clamp(tape, ratio_term, 0.0f, std::numeric_limits<float>::max());
  Tensor mean_term = ops::mul_scalar(tape, ops::mul(tape, posterior.mu, posterior.mu), inv_2s2);
  Tensor per_dim = ops::add(tape, ops::mul_scalar(tape, ratio_term, 0.5f), mean_term);
  return ops::sum_per_sample(tape, per_dim);
}

Tensor reconstruction_loglik(Tape& tape, const Tensor& images, const Tensor& decoded) {
  if (images.shape() != decoded.shape()) {
    throw ShapeError("reconstruction_loglik: images " + shape_to_string(images.shape()) +
                     " vs decoded " + shape_to_string(decoded.shape()));
  }
  std::vector<float> complement(images.numel());
  const auto x = images.data();
  for (std::size_t i = 0; i < complement.size(); ++i) complement[i] = 1.0f - x[i];
  const Tensor one_minus_x(images.shape(), std::move(complement));
  Tensor one_minus_p = ops::add_scalar(tape, ops::mul_scalar(tape, decoded, -1.0f), 1.0f);
  Tensor hits = ops::mul(tape, images, ops::log(tape, decoded));
  Tensor misses = ops::mul(tape, one_minus_x, ops::log(tape, one_minus_p));
  return ops::sum_per_sample(tape, ops::add(tape, hits, misses));
}

Tensor elbo(Tape& tape, const Network& net, const PriorSpec& prior, const Tensor& images,
            const Tensor& noise) {
  GaussianPosterior posterior = encode(tape, net, images);
  Tensor codes = reparameterize(tape, posterior, noise);
  Tensor decoded = decode(tape, net, codes);
  return ops::sub(tape, reconstruction_loglik(tape, images, decoded),
                  kl_to_prior(tape, posterior, prior));
}

Tensor joint_negative_elbo(Tape& tape, const Network& net, std::span<const PriorSpec> kl_priors,
                           std::span<const Tensor> batches, std::span<const Tensor> noises) {
  if (batches.empty() || batches.size() != kl_priors.size() || noises.size() != batches.size()) {
    throw ShapeError("joint_negative_elbo: " + std::to_string(batches.size()) + " batches, " +
                     std::to_string(noises.size()) + " noise tensors for " +
                     std::to_string(kl_priors.size()) + " priors");
  }
  const std::size_t n = batches.front().dim(0);
  for (const auto& b : batches) {
    if (b.rank() != 4 || b.dim(0) != n) {
      throw ShapeError("joint_negative_elbo: branch batches must share batch size " +
                       std::to_string(n) + ", got " + shape_to_string(b.shape()));
    }
  }
  // All branches share the encoder and decoder, so they run as one batch.
  Tensor images = batches.size() == 1 ? batches.front() : ops::concat(tape, batches, 0);
  Tensor noise = noises.size() == 1 ? noises.front() : ops::concat(tape, noises, 0);
  GaussianPosterior posterior = encode(tape, net, images);
  Tensor decoded = decode(tape, net, reparameterize(tape, posterior, noise));
  Tensor recon = reconstruction_loglik(tape, images, decoded);

  Tensor total;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    GaussianPosterior branch{ops::slice(tape, posterior.mu, 0, b * n, n),
                             ops::slice(tape, posterior.log_var, 0, b * n, n)};
    Tensor branch_elbo = ops::sub(tape, ops::slice(tape, recon, 0, b * n, n),
                                  kl_to_prior(tape, branch, kl_priors[b]));
    Tensor term = ops::mean(tape, branch_elbo);
    total = total.defined() ? ops::add(tape, total, term) : term;
  }
  return ops::mul_scalar(tape, total, -1.0f);
}

Tensor bpvae_loss(Tape& tape, const Model& model, const Tensor& basic_batch,
                  std::span<const Tensor> simple_batches, std::span<const Tensor> noises) {
  if (simple_batches.size() != model.simple_priors.size()) {
    throw ShapeError("bpvae_loss: " + std::to_string(simple_batches.size()) +
                     " simple batches for " + std::to_string(model.simple_priors.size()) +
                     " simple priors");
  }
  validate_priors(model.basic_prior, model.simple_priors);
  std::vector<PriorSpec> kl_priors{model.basic_prior};
  std::vector<Tensor> batches{basic_batch};
  for (std::size_t k = 0; k < simple_batches.size(); ++k) {
    kl_priors.push_back(model.branch_kl_prior(k));
    batches.push_back(simple_batches[k]);
  }
  return joint_negative_elbo(tape, model.network, kl_priors, batches, noises);
}

Tensor reconstruct(Tape& tape, const Network& net, const Tensor& images, const Tensor& noise) {
  GaussianPosterior posterior = encode(tape, net, images);
  return decode(tape, net, reparameterize(tape, posterior, noise));
}

Tensor gaussian_noise(std::size_t batch, std::size_t latent_dim, std::uint64_t seed,
                      std::uint64_t stream) {
  Rng rng(derive_seed(seed, stream));
  Tensor noise = Tensor::zeros({batch, latent_dim});
  fill_standard_normal(rng, noise.data());
  return noise;
}

}  // namespace bpvae::models
