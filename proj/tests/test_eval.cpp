#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "bpvae/eval.hpp"
#include "oracles.hpp"

using namespace bpvae;
using namespace bpvae::eval;

namespace {

ScoreSet make_set(const std::vector<double>& id, const std::vector<double>& ood) {
  ScoreSet s;
  for (double v : id) s.entries.push_back({v, Label::kId, "id"});
  for (double v : ood) s.entries.push_back({v, Label::kOod, "ood"});
  return s;
}

ScoreSet random_set(Rng& rng, bool with_ties) {
  std::uniform_int_distribution<std::size_t> size(1, 250);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n_id = size(rng), n_ood = size(rng);
  ScoreSet s;
  for (std::size_t i = 0; i < n_id + n_ood; ++i) {
    double v = normal(rng) + (i < n_id ? 0.7 : 0.0);
    if (with_ties) v = std::round(v * 4.0) / 4.0;
    s.entries.push_back({v, i < n_id ? Label::kId : Label::kOod, i < n_id ? "id" : "ood"});
  }
  return s;
}

ScoreSet swap_labels(ScoreSet s) {
  for (auto& e : s.entries) e.label = e.label == Label::kId ? Label::kOod : Label::kId;
  return s;
}

models::Architecture small_architecture() {
  models::Architecture a;
  a.channels1 = 4;
  a.channels2 = 8;
  a.latent_dim = 4;
  return a;
}

SelectionConfig small_selection() {
  SelectionConfig c;
  c.architecture = small_architecture();
  c.train.epochs = 2;
  c.train.batch_size = 16;
  c.train.learning_rate = 1e-3f;
  c.train.seed = 4;
  return c;
}

}  // namespace

TEST(Auroc, ReferenceExamples) {
  EXPECT_DOUBLE_EQ(auroc(make_set({2, 3}, {0, 1})), 1.0);
  EXPECT_DOUBLE_EQ(auroc(make_set({1}, {1})), 0.5);
  EXPECT_DOUBLE_EQ(auroc(make_set({0, 1}, {2, 3})), 0.0);
  EXPECT_DOUBLE_EQ(auroc(make_set({1, 3}, {2, 0})), 0.75);
  EXPECT_THROW(auroc(make_set({1, 2}, {})), std::invalid_argument);
  EXPECT_THROW(auroc(make_set({}, {1})), std::invalid_argument);
}

TEST(Auroc, MatchesPairwiseOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const ScoreSet s = random_set(rng, trial % 2 == 0);
    EXPECT_NEAR(auroc(s), bpvae::testing::brute_force_auroc(s), 1e-9) << trial;
  }
}

TEST(Auroc, LabelSwapGivesComplement) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const ScoreSet s = random_set(rng, trial % 2 == 0);
    EXPECT_NEAR(auroc(swap_labels(s)), 1.0 - auroc(s), 1e-12);
  }
}

TEST(Auroc, InvariantUnderMonotoneTransform) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const ScoreSet s = random_set(rng, trial % 2 == 0);
    ScoreSet t = s;
    for (auto& e : t.entries) e.score = std::exp(0.5 * e.score) - 3.0;
    EXPECT_NEAR(auroc(t), auroc(s), 1e-12);
    EXPECT_NEAR(auprc(t), auprc(s), 1e-12);
  }
}

TEST(Auprc, ReferenceExamples) {
  EXPECT_DOUBLE_EQ(auprc(make_set({2, 3}, {0, 1})), 1.0);
  EXPECT_DOUBLE_EQ(auprc(make_set({1, 1}, {1, 1})), 0.5);
  EXPECT_DOUBLE_EQ(auprc(make_set({5, 5, 5}, {5})), 0.75);
  EXPECT_THROW(auprc(make_set({}, {1})), std::invalid_argument);
}

TEST(Auprc, MatchesThresholdSweepOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const ScoreSet s = random_set(rng, trial % 2 == 0);
    const double a = auprc(s);
    EXPECT_NEAR(a, bpvae::testing::brute_force_auprc(s), 1e-9) << trial;
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
}

TEST(ImageMetrics, IdenticalImages) {
  Rng rng(5);
  const Tensor x = bpvae::testing::random_tensor({2, 32, 32}, rng, 0.0f, 1.0f);
  EXPECT_EQ(mse(x.data(), x.data()), 0.0);
  EXPECT_EQ(psnr(x.data(), x.data()), std::numeric_limits<double>::infinity());
  EXPECT_NEAR(ssim(x.data(), x.data()), 1.0, 1e-12);
}

TEST(ImageMetrics, PsnrFromMse) {
  EXPECT_NEAR(psnr_from_mse(0.01), 20.0, 1e-12);
  EXPECT_NEAR(psnr_from_mse(1.0), 0.0, 1e-12);
  EXPECT_THROW(psnr_from_mse(-1.0), std::invalid_argument);
  EXPECT_THROW(psnr_from_mse(std::nan("")), std::invalid_argument);
  const std::vector<float> a(1024, 0.0f), b(1024, 0.1f);
  EXPECT_NEAR(mse(a, b), 0.01, 1e-9);
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-6);
}

TEST(ImageMetrics, RejectsShapeMismatch) {
  const std::vector<float> a(1024), b(1023), c(1000);
  EXPECT_THROW(mse(a, b), std::invalid_argument);
  EXPECT_THROW(ssim(a, b), std::invalid_argument);
  EXPECT_THROW(ssim(c, c), std::invalid_argument);
  EXPECT_THROW(ssim(std::vector<float>(16), std::vector<float>(16), 4, 4), std::invalid_argument);
}

TEST(ImageMetrics, SsimMatchesWindowedOracle) {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = bpvae::testing::random_tensor({2, 32, 32}, rng, 0.0f, 1.0f);
    Tensor y = x.clone();
    std::normal_distribution<float> noise(0.0f, 0.05f * (trial + 1));
    for (auto& v : y.data()) v = std::clamp(v + noise(rng), 0.0f, 1.0f);
    const std::vector<float> xv(x.data().begin(), x.data().end());
    const std::vector<float> yv(y.data().begin(), y.data().end());
    const double s = ssim(xv, yv);
    EXPECT_NEAR(s, bpvae::testing::naive_ssim(xv, yv, 32, 32), 1e-6);
    EXPECT_NEAR(s, ssim(yv, xv), 1e-12);
    EXPECT_LE(s, 1.0);
  }
  const Tensor a = bpvae::testing::random_tensor({12, 20}, rng, 0.0f, 1.0f);
  const Tensor b = bpvae::testing::random_tensor({12, 20}, rng, 0.0f, 1.0f);
  const std::vector<float> av(a.data().begin(), a.data().end()), bv(b.data().begin(), b.data().end());
  EXPECT_NEAR(ssim(av, bv, 12, 20), bpvae::testing::naive_ssim(av, bv, 12, 20), 1e-6);
}

TEST(Histogram, ReferenceExamples) {
  const std::vector<double> s{0, 1, 2, 3};
  const auto two = histogram(s, 2);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].count, 2u);
  EXPECT_EQ(two[1].count, 2u);
  EXPECT_DOUBLE_EQ(two[0].left, 0.0);
  EXPECT_DOUBLE_EQ(two[1].right, 3.0);
  const auto one = histogram(s, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].count, 4u);
  const auto flat = histogram(std::vector<double>{5, 5, 5}, 4);
  EXPECT_EQ(flat[0].count, 3u);
  EXPECT_THROW(histogram(s, 0), std::invalid_argument);
  EXPECT_THROW(histogram(std::vector<double>{}, 3), std::invalid_argument);
}

TEST(Histogram, CountsAreConserved) {
  Rng rng(7);
  std::normal_distribution<double> normal(0.0, 10.0);
  for (std::size_t bins : {1u, 3u, 17u, 50u}) {
    std::vector<double> s(301);
    for (auto& v : s) v = normal(rng);
    std::size_t total = 0;
    for (const auto& b : histogram(s, bins)) total += b.count;
    EXPECT_EQ(total, s.size());
  }
}

TEST(Histogram, JointFrameSharesEdges) {
  const ScoreSet s = make_set({0, 1, 2}, {2, 3, 4, 5});
  const auto h = joint_histogram(s, 5);
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h[0].dataset, "id");
  EXPECT_EQ(h[1].dataset, "ood");
  std::size_t id_total = 0, ood_total = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_DOUBLE_EQ(h[0].bins[i].left, h[1].bins[i].left);
    id_total += h[0].bins[i].count;
    ood_total += h[1].bins[i].count;
  }
  EXPECT_EQ(id_total, 3u);
  EXPECT_EQ(ood_total, 4u);
  EXPECT_DOUBLE_EQ(h[0].bins[0].left, 0.0);
  EXPECT_DOUBLE_EQ(h[0].bins[4].right, 5.0);
}

TEST(LikelihoodRatio, ReferenceExamples) {
  const std::vector<double> same{-10, -20, -30};
  const auto a = likelihood_ratio_report(same, same);
  EXPECT_DOUBLE_EQ(a.difference, 0.0);
  EXPECT_DOUBLE_EQ(a.ratio, 1.0);
  EXPECT_FALSE(a.flagged);
  const auto b = likelihood_ratio_report(std::vector<double>{-100}, std::vector<double>{-50});
  EXPECT_DOUBLE_EQ(b.ratio, 0.5);
  EXPECT_DOUBLE_EQ(b.difference, 50.0);
  EXPECT_TRUE(b.flagged);
}

TEST(Statistics, MeanAndMedian) {
  EXPECT_DOUBLE_EQ(mean(std::vector<double>{1, 2, 6}), 3.0);
  EXPECT_DOUBLE_EQ(median(std::vector<double>{5, 1, 3}), 3.0);
  EXPECT_DOUBLE_EQ(median(std::vector<double>{4, 1, 3, 2}), 2.5);
  EXPECT_THROW(mean(std::vector<double>{}), std::invalid_argument);
}

TEST(ScoreSet, ValidateRejectsEmptyAndNonFinite) {
  EXPECT_THROW(ScoreSet{}.validate(), std::invalid_argument);
  ScoreSet s = make_set({1, std::numeric_limits<double>::infinity()}, {0});
  EXPECT_THROW(s.validate(), std::invalid_argument);
  EXPECT_NO_THROW(make_set({1}, {0}).validate());
  EXPECT_EQ(make_set({1, 2}, {0}).count(Label::kId), 2u);
}

TEST(Scoring, DeterministicNonPositiveAndWorkerIndependent) {
  const models::Model m = models::make_vae(small_architecture(), 1.0f, 3);
  const data::ImageDataset d = data::synth_generate({data::SynthKind::kStripes, 0.5, 300, 2});
  const auto a = score_images(m, d, {7, 1});
  const auto b = score_images(m, d, {7, 1});
  const auto c = score_images(m, d, {7, 3});
  const auto other = score_images(m, d, {8, 1});
  ASSERT_EQ(a.size(), 300u);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  EXPECT_NE(a, other);
  for (double v : a) EXPECT_LE(v, 0.0);
  const ScoreSet s = score_dataset(m, d, Label::kOod, {7, 1});
  EXPECT_EQ(s.count(Label::kOod), 300u);
  EXPECT_EQ(s.entries[0].dataset, d.name());
}

TEST(Scoring, SameDatasetAsIdAndOodGivesHalf) {
  const models::Model m = models::make_vae(small_architecture(), 1.0f, 3);
  const data::ImageDataset d = data::synth_generate({data::SynthKind::kBlobs, 0.5, 40, 2});
  ScoreSet s = score_dataset(m, d, Label::kId, {1, 1});
  s.append(score_dataset(m, d, Label::kOod, {1, 1}).entries);
  EXPECT_DOUBLE_EQ(auroc(s), 0.5);
}

TEST(Scoring, RejectsNonFiniteParameters) {
  models::Model m = models::make_vae(small_architecture(), 1.0f, 3);
  m.network.parameters()[0].data()[0] = std::numeric_limits<float>::quiet_NaN();
  const data::ImageDataset d = data::synth_generate({data::SynthKind::kBlobs, 0.5, 4, 2});
  EXPECT_THROW(score_images(m, d, {}), std::invalid_argument);
}

TEST(Selection, IdenticalCandidateIsNotSimple) {
  const data::ImageDataset basic = data::synth_generate({data::SynthKind::kNoiseTexture, 0.9, 48, 1});
  const std::vector<data::ImageDataset> candidates{basic};
  const auto v = select_simple(basic, candidates, small_selection());
  ASSERT_EQ(v.size(), 1u);
  ASSERT_TRUE(v[0].self_elbo && v[0].basic_self_elbo);
  EXPECT_EQ(*v[0].self_elbo, *v[0].basic_self_elbo);
  EXPECT_EQ(v[0].verdict, Verdict::kNotSimple);
  EXPECT_EQ(to_string(v[0].verdict), "not-simple");
}

TEST(Selection, VerdictIsAntisymmetric) {
  const data::ImageDataset a = data::synth_generate({data::SynthKind::kNoiseTexture, 0.9, 48, 1});
  const data::ImageDataset b = data::synth_generate({data::SynthKind::kBlobs, 0.1, 48, 2});
  for (Statistic stat : {Statistic::kMean, Statistic::kMedian}) {
    SelectionConfig cfg = small_selection();
    cfg.statistic = stat;
    const std::vector<data::ImageDataset> only_b{b}, only_a{a};
    const auto ab = select_simple(a, only_b, cfg);
    const auto ba = select_simple(b, only_a, cfg);
    EXPECT_FALSE(ab[0].verdict == Verdict::kSimple && ba[0].verdict == Verdict::kSimple);
    EXPECT_EQ(*ab[0].self_elbo, *ba[0].basic_self_elbo);
  }
}

TEST(Selection, DivergentCandidateIsIndeterminate) {
  const data::ImageDataset basic = data::synth_generate({data::SynthKind::kBlobs, 0.1, 32, 1});
  SelectionConfig cfg = small_selection();
  cfg.train.learning_rate = 1e30f;
  const std::vector<data::ImageDataset> candidates{basic};
  const auto v = select_simple(basic, candidates, cfg);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].candidate, basic.name());
  EXPECT_EQ(v[0].verdict, Verdict::kIndeterminate);
  EXPECT_FALSE(v[0].self_elbo.has_value());
}

TEST(Csv, NumbersRoundTrip) {
  for (double v : {0.1, -714.0034912109375, 1e-300, 123456789.123456789}) {
    EXPECT_EQ(std::stod(format_number(v)), v);
  }
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_number(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(format_number(std::nan("")), "nan");
  std::ostringstream out;
  const std::vector<std::pair<std::string, double>> m{{"auroc", 0.5}};
  write_metrics_csv(out, m);
  EXPECT_EQ(out.str(), "metric,value\nauroc,0.5\n");
  std::ostringstream h;
  const std::vector<HistogramBin> bins{{0.0, 1.0, 3}};
  write_histogram_csv(h, bins);
  EXPECT_EQ(h.str(), "bin_left,bin_right,count\n0,1,3\n");
}
