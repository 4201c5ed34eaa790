#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "bpvae/data.hpp"
#include "bpvae/error.hpp"
#include "bpvae/random.hpp"
#include "oracles.hpp"

using namespace bpvae;
using namespace bpvae::data;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("bpvae_data_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> idx_bytes(std::size_t count, std::size_t rows, std::size_t cols,
                                    std::uint8_t fill = 0) {
  std::vector<std::uint8_t> b{0, 0, 8, 3};
  for (std::uint32_t v : {count, rows, cols}) {
    for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
  }
  b.resize(16 + count * rows * cols, fill);
  return b;
}

void expect_data_error(const std::filesystem::path& path, const std::string& fragment) {
  try {
    load_idx(path);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("byte offset"), std::string::npos) << e.what();
  }
}

double mean_entropy(SynthKind kind, double complexity, std::uint64_t seed) {
  const ImageDataset d = synth_generate({kind, complexity, 500, seed});
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) total += pixel_entropy(d.image(i));
  return total / static_cast<double>(d.size());
}

double pixel_std(std::span<const float> image) {
  const double mean = std::accumulate(image.begin(), image.end(), 0.0) / image.size();
  double var = 0.0;
  for (float v : image) var += (v - mean) * (v - mean);
  return std::sqrt(var / image.size());
}

}  // namespace

TEST(ImageDataset, EnforcesInvariants) {
  EXPECT_THROW(ImageDataset("x", Split::kTrain, Source::kSynthetic, {}), DataError);
  EXPECT_THROW(ImageDataset("x", Split::kTrain, Source::kSynthetic, std::vector<float>(1000, 0.0f)),
               DataError);
  std::vector<float> pixels(kImagePixels, 0.5f);
  pixels[17] = 1.5f;
  EXPECT_THROW(ImageDataset("x", Split::kTrain, Source::kSynthetic, pixels), DataError);
  pixels[17] = std::nanf("");
  EXPECT_THROW(ImageDataset("x", Split::kTrain, Source::kSynthetic, pixels), DataError);
}

TEST(ImageDataset, BatchesAndSlices) {
  const ImageDataset d = synth_generate({SynthKind::kStripes, 0.5, 6, 3});
  const std::vector<std::size_t> idx{4, 1};
  const Tensor b = d.batch(idx);
  EXPECT_EQ(b.shape(), (Shape{2, 1, 32, 32}));
  EXPECT_TRUE(std::equal(d.image(4).begin(), d.image(4).end(), b.data().begin()));
  EXPECT_TRUE(std::equal(d.image(1).begin(), d.image(1).end(), b.data().begin() + kImagePixels));
  const ImageDataset s = d.slice(2, 3, "part", Split::kTest);
  EXPECT_EQ(s.size(), 3u);
  EXPECT_EQ(s.split(), Split::kTest);
  EXPECT_TRUE(std::equal(s.image(0).begin(), s.image(0).end(), d.image(2).begin()));
  EXPECT_EQ(d.head(100).size(), 6u);
  EXPECT_THROW(d.image(6), std::out_of_range);
  EXPECT_THROW(d.slice(5, 2, "x", Split::kTrain), std::out_of_range);
}

TEST(LoadIdx, TenImagesOfNativeSize) {
  TempDir dir;
  std::vector<std::uint8_t> pixels(10 * 28 * 28);
  Rng rng(1);
  for (auto& p : pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
  write_idx(dir / "digits.idx", pixels, 10, 28, 28);
  const ImageDataset d = load_idx(dir / "digits.idx");
  EXPECT_EQ(d.size(), 10u);
  EXPECT_EQ(d.pixels().size(), 10u * 32 * 32);
  EXPECT_EQ(d.name(), "digits");
  EXPECT_EQ(d.source(), Source::kIdx);
  for (float v : d.pixels()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  EXPECT_EQ(load_idx(dir / "digits.idx", 4).size(), 4u);
  EXPECT_EQ(load_idx(dir / "digits.idx", 40).size(), 10u);
}

TEST(LoadIdx, ZeroPayloadGivesZeroPixels) {
  TempDir dir;
  write_bytes(dir / "z.idx", idx_bytes(3, 28, 28, 0));
  const ImageDataset d = load_idx(dir / "z.idx");
  for (float v : d.pixels()) EXPECT_EQ(v, 0.0f);
}

TEST(LoadIdx, SingleBrightPixelMatchesBilinearOracle) {
  TempDir dir;
  std::vector<std::uint8_t> pixels(28 * 28, 0);
  pixels[13 * 28 + 9] = 255;
  write_idx(dir / "dot.idx", pixels, 1, 28, 28);
  const ImageDataset d = load_idx(dir / "dot.idx");
  std::vector<float> native(28 * 28, 0.0f);
  native[13 * 28 + 9] = 1.0f;
  const auto expected = bpvae::testing::naive_bilinear(native, 28, 28, 32, 32);
  const float max_pixel = *std::max_element(d.pixels().begin(), d.pixels().end());
  EXPECT_LE(max_pixel, 1.0f);
  EXPECT_GT(max_pixel, 0.0f);
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(d.pixels()[i], expected[i], 1e-6f);
}

TEST(LoadIdx, StructuredErrorsWithByteOffsets) {
  TempDir dir;
  auto bad_magic = idx_bytes(1, 4, 4);
  bad_magic[0] = 0x12;
  write_bytes(dir / "magic.idx", bad_magic);
  expect_data_error(dir / "magic.idx", "byte offset 0: bad magic");

  auto bad_type = idx_bytes(1, 4, 4);
  bad_type[2] = 0x0d;
  write_bytes(dir / "type.idx", bad_type);
  expect_data_error(dir / "type.idx", "byte offset 2");

  auto bad_rank = idx_bytes(1, 4, 4);
  bad_rank[3] = 1;
  write_bytes(dir / "rank.idx", bad_rank);
  expect_data_error(dir / "rank.idx", "byte offset 3: rank 1 is not 3");

  auto truncated = idx_bytes(2, 4, 4);
  truncated.resize(truncated.size() - 5);
  write_bytes(dir / "short.idx", truncated);
  expect_data_error(dir / "short.idx", "byte offset 43: payload truncated");

  write_bytes(dir / "tiny.idx", {0, 0, 8, 3, 0, 0});
  expect_data_error(dir / "tiny.idx", "header truncated");

  EXPECT_THROW(load_idx(dir / "missing.idx"), DataError);
}

TEST(LoadIdx, AnyConformingFileParses) {
  TempDir dir;
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t count = 1 + rng() % 4, rows = 1 + rng() % 40, cols = 1 + rng() % 40;
    std::vector<std::uint8_t> pixels(count * rows * cols);
    for (auto& p : pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
    write_idx(dir / "r.idx", pixels, count, rows, cols);
    const ImageDataset d = load_idx(dir / "r.idx");
    EXPECT_EQ(d.size(), count);
    EXPECT_EQ(d.pixels().size(), count * kImagePixels);
  }
}

TEST(Resize, SameSizeIsIdentity) {
  Rng rng(2);
  const Tensor img = bpvae::testing::random_tensor({32, 32}, rng, 0.0f, 1.0f);
  const auto out = resize_bilinear(img.data(), 32, 32, 32, 32);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], img.data()[i], 1e-6f);
}

TEST(Resize, MatchesBruteForceOracle) {
  Rng rng(3);
  for (auto [ih, iw] : {std::pair<std::size_t, std::size_t>{28, 28}, {7, 13}, {64, 48}, {1, 1}}) {
    const Tensor img = bpvae::testing::random_tensor({ih, iw}, rng, 0.0f, 1.0f);
    const std::vector<float> in(img.data().begin(), img.data().end());
    const auto out = resize_bilinear(in, ih, iw, 32, 32);
    const auto expected = bpvae::testing::naive_bilinear(in, ih, iw, 32, 32);
    ASSERT_EQ(out.size(), expected.size());
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], expected[i], 1e-6f);
  }
  EXPECT_THROW(resize_bilinear(std::vector<float>(10), 3, 3, 32, 32), ShapeError);
}

TEST(Grayscale, ReferenceColors) {
  EXPECT_FLOAT_EQ(to_grayscale(std::vector<float>{1, 1, 1}, 1, 1, 3)[0], 1.0f);
  EXPECT_FLOAT_EQ(to_grayscale(std::vector<float>{1, 0, 0}, 1, 1, 3)[0], 0.299f);
  EXPECT_THROW(to_grayscale(std::vector<float>(8), 2, 2, 2), ShapeError);
}

TEST(Grayscale, MatchesWeightedSumOracle) {
  Rng rng(4);
  const Tensor rgb = bpvae::testing::random_tensor({5, 7, 3}, rng, 0.0f, 1.0f);
  const auto gray = to_grayscale(rgb.data(), 5, 7, 3);
  for (std::size_t i = 0; i < 35; ++i) {
    const auto* p = rgb.data().data() + 3 * i;
    EXPECT_EQ(gray[i], 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2]);
  }
}

TEST(LoadRawRgb, PlanarImagesBecomeGray) {
  TempDir dir;
  const std::size_t h = 4, w = 6;
  std::vector<std::uint8_t> planar(2 * 3 * h * w, 0);
  // First image pure red, second pure white.
  std::fill(planar.begin(), planar.begin() + h * w, 255);
  std::fill(planar.begin() + 3 * h * w, planar.end(), 255);
  write_rawrgb(dir / "rgb.raw", planar, 2, h, w);
  const ImageDataset d = load_rawrgb(dir / "rgb.raw");
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.source(), Source::kRawRgb);
  for (float v : d.image(0)) EXPECT_NEAR(v, 0.299f, 1e-6f);
  for (float v : d.image(1)) EXPECT_NEAR(v, 1.0f, 1e-6f);

  write_bytes(dir / "bad.raw", {'R', 'G', 'B', ' ', '1', '\n'});
  EXPECT_THROW(load_rawrgb(dir / "bad.raw"), DataError);
  std::vector<std::uint8_t> short_file{'R', 'A', 'W', 'R', 'G', 'B', ' ', '1', ' ', '2', ' ', '2', '\n', 0};
  write_bytes(dir / "short.raw", short_file);
  EXPECT_THROW(load_rawrgb(dir / "short.raw"), DataError);
}

TEST(Synthetic, LowComplexityBlobsAreNearlyUniform) {
  const ImageDataset d = synth_generate({SynthKind::kBlobs, 0.0, 200, 7});
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) total += pixel_std(d.image(i));
  EXPECT_LT(total / d.size(), 0.15);
}

TEST(Synthetic, HighComplexityNoiseHasHighVariance) {
  const ImageDataset d = synth_generate({SynthKind::kNoiseTexture, 1.0, 200, 7});
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) total += pixel_std(d.image(i));
  EXPECT_GT(total / d.size(), 0.15);
}

TEST(Synthetic, DeterministicPerSpec) {
  for (SynthKind kind : {SynthKind::kBlobs, SynthKind::kStripes, SynthKind::kNoiseTexture}) {
    const ImageDataset a = synth_generate({kind, 0.6, 20, 9});
    const ImageDataset b = synth_generate({kind, 0.6, 20, 9});
    const ImageDataset c = synth_generate({kind, 0.6, 20, 10});
    EXPECT_TRUE(std::equal(a.pixels().begin(), a.pixels().end(), b.pixels().begin()));
    EXPECT_FALSE(std::equal(a.pixels().begin(), a.pixels().end(), c.pixels().begin()));
    for (float v : a.pixels()) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
    }
  }
}

TEST(Synthetic, RejectsInvalidSpecs) {
  EXPECT_THROW(synth_generate({SynthKind::kBlobs, 0.5, 0, 1}), ConfigError);
  EXPECT_THROW(synth_generate({SynthKind::kBlobs, 1.5, 1, 1}), ConfigError);
  EXPECT_THROW(parse_synth_kind("clouds"), ConfigError);
  EXPECT_EQ(parse_synth_kind("noise-texture"), SynthKind::kNoiseTexture);
  EXPECT_EQ(to_string(SynthKind::kStripes), "stripes");
}

TEST(Synthetic, NoiseTextureEntropyGrowsWithComplexity) {
  EXPECT_GT(mean_entropy(SynthKind::kNoiseTexture, 1.0, 11),
            mean_entropy(SynthKind::kNoiseTexture, 0.0, 11));
}

TEST(Synthetic, EntropyIsMonotoneInComplexity) {
  for (SynthKind kind : {SynthKind::kBlobs, SynthKind::kStripes, SynthKind::kNoiseTexture}) {
    double previous = -1.0;
    for (double c : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const double e = mean_entropy(kind, c, 13);
      EXPECT_GT(e, previous) << to_string(kind) << " complexity " << c;
      previous = e;
    }
  }
}

TEST(PixelEntropy, ConstantAndUniformImages) {
  EXPECT_DOUBLE_EQ(pixel_entropy(std::vector<float>(1024, 0.3f)), 0.0);
  std::vector<float> ramp(1024);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = (i % 32 + 0.5f) / 32.0f;
  EXPECT_NEAR(pixel_entropy(ramp), std::log(32.0), 1e-9);
}

TEST(BatchIndices, SizesAndCoverage) {
  const auto plain = batch_indices(10, 4, 1, false);
  ASSERT_EQ(plain.size(), 3u);
  EXPECT_EQ(plain[0].size(), 4u);
  EXPECT_EQ(plain[1].size(), 4u);
  EXPECT_EQ(plain[2].size(), 2u);
  std::size_t expected = 0;
  for (const auto& b : plain) {
    for (std::size_t i : b) EXPECT_EQ(i, expected++);
  }
  const auto shuffled = batch_indices(10, 4, 1, true);
  std::multiset<std::size_t> seen;
  for (const auto& b : shuffled) seen.insert(b.begin(), b.end());
  EXPECT_EQ(seen, (std::multiset<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
  EXPECT_EQ(shuffled, batch_indices(10, 4, 1, true));
  EXPECT_NE(batch_indices(100, 10, 1, true), batch_indices(100, 10, 2, true));
  EXPECT_THROW(batch_indices(10, 0, 1, true), std::invalid_argument);
}

TEST(CyclicSampler, EachPassIsAPermutation) {
  CyclicSampler s(5, 3);
  for (int pass = 0; pass < 3; ++pass) {
    const auto idx = s.next(5);
    EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 5u);
  }
  CyclicSampler a(7, 1), b(7, 1);
  EXPECT_EQ(a.next(20), b.next(20));
  EXPECT_THROW(CyclicSampler(0, 1), std::invalid_argument);
}
