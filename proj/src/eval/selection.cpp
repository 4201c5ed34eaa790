#include "bpvae/error.hpp"
#include "bpvae/eval.hpp"

namespace bpvae::eval {

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::kSimple:
      return "simple";
    case Verdict::kNotSimple:
      return "not-simple";
    case Verdict::kIndeterminate:
      return "indeterminate";
  }
  return "indeterminate";
}

std::optional<double> self_trained_likelihood(const data::ImageDataset& dataset,
                                              const SelectionConfig& config) {
  models::Model vae = models::make_vae(config.architecture, config.sigma, config.train.seed);
  try {
    models::train(vae, dataset, {}, config.train);
  } catch (const DivergenceError&) {
    return std::nullopt;
  }
  const std::vector<double> scores = score_images(vae, dataset, ScoreOptions{config.train.seed});
  return config.statistic == Statistic::kMedian ? median(scores) : mean(scores);
}

std::vector<SelectionVerdict> select_simple(const data::ImageDataset& basic,
                                            std::span<const data::ImageDataset> candidates,
                                            const SelectionConfig& config) {
  const std::optional<double> basic_stat = self_trained_likelihood(basic, config);
  std::vector<SelectionVerdict> out;
  for (const auto& candidate : candidates) {
    SelectionVerdict v;
    v.candidate = candidate.name();
    v.basic_self_elbo = basic_stat;
    v.self_elbo = self_trained_likelihood(candidate, config);
    if (v.self_elbo && basic_stat) {
      v.verdict = *v.self_elbo > *basic_stat ? Verdict::kSimple : Verdict::kNotSimple;
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace bpvae::eval
