#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bpvae/tensor.hpp"

namespace bpvae::data {

// Every dataset is stored as 32x32 single-channel images in [0, 1].
inline constexpr std::size_t kImageSide = 32;
inline constexpr std::size_t kImagePixels = kImageSide * kImageSide;

enum class Split { kTrain, kTest };
enum class Source { kIdx, kRawRgb, kSynthetic };

std::string to_string(Split split);
std::string to_string(Source source);

// Immutable set of preprocessed images, row-major, one image after another.
class ImageDataset {
 public:
  // Throws DataError when the pixel buffer is empty, not a whole number of
  // 32x32 images, or contains values outside [0, 1].
  ImageDataset(std::string name, Split split, Source source, std::vector<float> pixels);

  const std::string& name() const noexcept { return name_; }
  Split split() const noexcept { return split_; }
  Source source() const noexcept { return source_; }
  std::size_t size() const noexcept { return pixels_.size() / kImagePixels; }

  std::span<const float> pixels() const noexcept { return pixels_; }
  std::span<const float> image(std::size_t index) const;

  // Images at `indices` as a [n, 1, 32, 32] tensor.
  Tensor batch(std::span<const std::size_t> indices) const;
  // Contiguous images [start, start + count) as a [count, 1, 32, 32] tensor.
  Tensor range(std::size_t start, std::size_t count) const;

  // First `count` images (all of them if count >= size()).
  ImageDataset head(std::size_t count) const;
  // Images [start, start + count), renamed and re-split.
  ImageDataset slice(std::size_t start, std::size_t count, std::string name,
                     Split split) const;

 private:
  std::string name_;
  Split split_;
  Source source_;
  std::vector<float> pixels_;
};

// ---------------------------------------------------------------------------
// Preprocessing

// Bilinear resampling with half-pixel centers (align-corners off). Resizing
// to the source size is the identity.
std::vector<float> resize_bilinear(std::span<const float> image, std::size_t in_height,
                                   std::size_t in_width, std::size_t out_height,
                                   std::size_t out_width);

// Interleaved H x W x channels RGB in [0,1] to H x W luma with BT.601 weights
// y = 0.299 r + 0.587 g + 0.114 b. Throws ShapeError if channels != 3.
std::vector<float> to_grayscale(std::span<const float> rgb, std::size_t height,
                                std::size_t width, std::size_t channels);

// ---------------------------------------------------------------------------
// File formats

// IDX unsigned-byte rank-3 image file (MNIST family): big-endian magic
// 0x00000803, then count, rows, cols as uint32, then row-major bytes.
// Pixels are scaled by 1/255 and resized to 32x32.
ImageDataset load_idx(const std::filesystem::path& path,
                      std::optional<std::size_t> limit = std::nullopt,
                      Split split = Split::kTrain);

// "RAWRGB <count> <height> <width>\n" followed by count * 3 * height * width
// bytes, channel-planar per image. Converted to grayscale and resized.
ImageDataset load_rawrgb(const std::filesystem::path& path,
                         std::optional<std::size_t> limit = std::nullopt,
                         Split split = Split::kTrain);

// Writers used by tests and tooling to produce conforming files.
void write_idx(const std::filesystem::path& path, std::span<const std::uint8_t> pixels,
               std::size_t count, std::size_t rows, std::size_t cols);
void write_rawrgb(const std::filesystem::path& path, std::span<const std::uint8_t> planar,
                  std::size_t count, std::size_t height, std::size_t width);

// ---------------------------------------------------------------------------
// Procedural data

enum class SynthKind { kBlobs, kStripes, kNoiseTexture };

std::string to_string(SynthKind kind);
// Accepts "blobs", "stripes", "noise-texture"; throws ConfigError otherwise.
SynthKind parse_synth_kind(const std::string& text);

struct SyntheticSpec {
  SynthKind kind = SynthKind::kBlobs;
  double complexity = 0.0;  // in [0, 1]
  std::size_t count = 1;
  std::uint64_t seed = 0;
};

// Deterministic for a fixed spec. Throws ConfigError on count == 0 or
// complexity outside [0, 1].
ImageDataset synth_generate(const SyntheticSpec& spec, Split split = Split::kTrain);

// Shannon entropy (nats) of the pixel-intensity histogram of one image.
double pixel_entropy(std::span<const float> image, std::size_t bins = 32);

// ---------------------------------------------------------------------------
// Batching

// Index batches covering [0, n) exactly once. With shuffle the order is a
// permutation seeded by `seed`; the final batch may be short.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, bool shuffle);

// Endless stream of indices over [0, n): each pass is a fresh seeded
// permutation, so a shorter dataset cycles while a longer one is consumed.
class CyclicSampler {
 public:
  CyclicSampler(std::size_t n, std::uint64_t seed);
  std::vector<std::size_t> next(std::size_t count);

 private:
  void refill();

  std::size_t n_;
  std::uint64_t seed_;
  std::uint64_t pass_ = 0;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace bpvae::data
