#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "bpvae/eval.hpp"
#include "bpvae/ops.hpp"

namespace bpvae::eval {
namespace {

// Scoring chunk; noise is keyed on the chunk index so sharding across
// workers reproduces the serial result exactly.
constexpr std::size_t kChunk = 128;

void score_chunks(const models::Model& model, const data::ImageDataset& dataset,
                  std::uint64_t seed, std::size_t first_chunk, std::size_t last_chunk,
                  std::vector<double>& out) {
  const std::size_t latent = model.network.architecture().latent_dim;
  for (std::size_t c = first_chunk; c < last_chunk; ++c) {
    const std::size_t start = c * kChunk;
    const std::size_t n = std::min(kChunk, dataset.size() - start);
    Tape tape;
    tape.set_recording(false);
    Tensor noise = models::gaussian_noise(n, latent, seed, c);
    Tensor values =
        models::elbo(tape, model.network, model.basic_prior, dataset.range(start, n), noise);
    for (std::size_t i = 0; i < n; ++i) out[start + i] = values.data()[i];
  }
}

}  // namespace

std::string to_string(Label label) { return label == Label::kId ? "id" : "ood"; }

void ScoreSet::append(std::span<const ScoreEntry> more) {
  entries.insert(entries.end(), more.begin(), more.end());
}

std::size_t ScoreSet::count(Label label) const {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(), [label](const ScoreEntry& e) { return e.label == label; }));
}

std::vector<double> ScoreSet::scores() const {
  std::vector<double> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.score);
  return out;
}

std::vector<double> ScoreSet::scores(Label label) const {
  std::vector<double> out;
  for (const auto& e : entries) {
    if (e.label == label) out.push_back(e.score);
  }
  return out;
}

void ScoreSet::validate() const {
  if (entries.empty()) throw std::invalid_argument("score set is empty");
  for (const auto& e : entries) {
    if (!std::isfinite(e.score)) {
      throw std::invalid_argument("score set: non-finite score for dataset '" + e.dataset + "'");
    }
  }
}

std::vector<double> score_images(const models::Model& model, const data::ImageDataset& dataset,
                                 const ScoreOptions& options) {
  for (const auto& p : model.network.parameters()) {
    for (float v : p.data()) {
      if (!std::isfinite(v)) throw std::invalid_argument("score: model has non-finite parameters");
    }
  }
  std::vector<double> out(dataset.size());
  const std::size_t chunks = (dataset.size() + kChunk - 1) / kChunk;
  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, chunks);
  if (workers == 1) {
    score_chunks(model, dataset, options.seed, 0, chunks, out);
    return out;
  }
  std::vector<std::thread> threads;
  const std::size_t per = (chunks + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t first = w * per;
    const std::size_t last = std::min(chunks, first + per);
    if (first >= last) break;
    threads.emplace_back(score_chunks, std::cref(model), std::cref(dataset), options.seed, first,
                         last, std::ref(out));
  }
  for (auto& t : threads) t.join();
  return out;
}

ScoreSet score_dataset(const models::Model& model, const data::ImageDataset& dataset,
                       Label label, const ScoreOptions& options) {
  ScoreSet set;
  for (double s : score_images(model, dataset, options)) {
    set.entries.push_back(ScoreEntry{s, label, dataset.name()});
  }
  return set;
}

double mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean of empty range");
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

double median(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty range");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  return sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
}

LikelihoodRatio likelihood_ratio_report(std::span<const double> train_scores,
                                        std::span<const double> test_scores) {
  LikelihoodRatio r;
  r.train_mean = mean(train_scores);
  r.test_mean = mean(test_scores);
  r.difference = r.test_mean - r.train_mean;
  r.ratio = (-r.test_mean) / (-r.train_mean);
  r.flagged = r.ratio < 1.0;
  return r;
}

}  // namespace bpvae::eval
