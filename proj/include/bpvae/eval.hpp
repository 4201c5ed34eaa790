#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bpvae/data.hpp"
#include "bpvae/model.hpp"

namespace bpvae::eval {

// ---------------------------------------------------------------------------
// Likelihood scores

enum class Label { kId, kOod };

std::string to_string(Label label);

struct ScoreEntry {
  double score = 0.0;  // single-sample ELBO, the log-likelihood proxy
  Label label = Label::kId;
  std::string dataset;
};

struct ScoreSet {
  std::vector<ScoreEntry> entries;

  void append(std::span<const ScoreEntry> more);
  std::size_t size() const noexcept { return entries.size(); }
  std::size_t count(Label label) const;
  std::vector<double> scores() const;
  std::vector<double> scores(Label label) const;
  // Throws std::invalid_argument when empty or any score is non-finite.
  void validate() const;
};

struct ScoreOptions {
  std::uint64_t seed = 0;
  std::size_t workers = 1;  // disjoint shards scored on separate threads
};

// Per-sample ELBO under the model's basic prior. Results do not depend on
// `workers`. Throws std::invalid_argument if any parameter is non-finite.
std::vector<double> score_images(const models::Model& model, const data::ImageDataset& dataset,
                                 const ScoreOptions& options);

ScoreSet score_dataset(const models::Model& model, const data::ImageDataset& dataset,
                       Label label, const ScoreOptions& options);

double mean(std::span<const double> values);
double median(std::span<const double> values);

// ---------------------------------------------------------------------------
// Detection metrics (id is the positive class, higher score = more id)

// P(id score > ood score) with ties counted half, via midranks.
double auroc(const ScoreSet& scores);

// Average precision: sum over descending distinct thresholds of
// (recall_k - recall_{k-1}) * precision_k.
double auprc(const ScoreSet& scores);

// ---------------------------------------------------------------------------
// Reconstruction metrics on 32x32 (or height x width) image stacks in [0, 1]

inline constexpr std::size_t kSsimWindow = 8;
inline constexpr double kSsimC1 = 1e-4;  // (0.01 * 1)^2
inline constexpr double kSsimC2 = 9e-4;  // (0.03 * 1)^2

double mse(std::span<const float> reference, std::span<const float> test);
// -10 log10(mse); +infinity when mse == 0.
double psnr_from_mse(double mse_value);
double psnr(std::span<const float> reference, std::span<const float> test);
// Mean over all 8x8 stride-1 windows of all images, population statistics.
double ssim(std::span<const float> reference, std::span<const float> test,
            std::size_t height = data::kImageSide, std::size_t width = data::kImageSide);

// ---------------------------------------------------------------------------
// Histograms

struct HistogramBin {
  double left = 0.0;
  double right = 0.0;
  std::size_t count = 0;
};

// Equal-width bins over [min, max]; the last bin is closed on the right.
std::vector<HistogramBin> histogram(std::span<const double> scores, std::size_t bins);

struct DatasetHistogram {
  std::string dataset;
  std::vector<HistogramBin> bins;
};

// One histogram per dataset over the joint score range.
std::vector<DatasetHistogram> joint_histogram(const ScoreSet& scores, std::size_t bins);

struct MetricsReport {
  double mse = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
  std::optional<double> auroc;
  std::optional<double> auprc;
  std::vector<HistogramBin> histogram;
};

// ---------------------------------------------------------------------------
// Train-vs-test likelihood comparison

struct LikelihoodRatio {
  double train_mean = 0.0;
  double test_mean = 0.0;
  double difference = 0.0;  // test_mean - train_mean
  double ratio = 1.0;       // mean(-test) / mean(-train)
  bool flagged = false;     // ratio < 1: test data looks more likely than training data
};

LikelihoodRatio likelihood_ratio_report(std::span<const double> train_scores,
                                        std::span<const double> test_scores);

// ---------------------------------------------------------------------------
// Simple-dataset selection

enum class Verdict { kSimple, kNotSimple, kIndeterminate };
enum class Statistic { kMean, kMedian };

std::string to_string(Verdict verdict);

struct SelectionConfig {
  models::Architecture architecture;
  float sigma = 1.0f;
  models::TrainConfig train;
  Statistic statistic = Statistic::kMean;
};

struct SelectionVerdict {
  std::string candidate;
  std::optional<double> self_elbo;  // unset when the candidate's training diverged
  std::optional<double> basic_self_elbo;
  Verdict verdict = Verdict::kIndeterminate;
};

// Self-trained likelihood of one dataset: a fresh plain VAE trained on it
// under `config`, then scored on the same training images.
std::optional<double> self_trained_likelihood(const data::ImageDataset& dataset,
                                              const SelectionConfig& config);

// A candidate is simple iff its self-trained statistic is strictly greater
// than the basic dataset's.
std::vector<SelectionVerdict> select_simple(const data::ImageDataset& basic,
                                            std::span<const data::ImageDataset> candidates,
                                            const SelectionConfig& config);

// ---------------------------------------------------------------------------
// CSV output (header row first, numbers round-trip exactly)

void write_metrics_csv(std::ostream& out,
                       std::span<const std::pair<std::string, double>> metrics);
void write_histogram_csv(std::ostream& out, std::span<const HistogramBin> bins);
void write_joint_histogram_csv(std::ostream& out, std::span<const DatasetHistogram> histograms);
std::string format_number(double value);

}  // namespace bpvae::eval
