#include <algorithm>
#include <cmath>
#include <numbers>

#include "bpvae/data.hpp"
#include "bpvae/error.hpp"
#include "bpvae/random.hpp"

namespace bpvae::data {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Canvas {
  std::vector<double> values = std::vector<double>(kImagePixels, 0.0);

  double& at(std::size_t y, std::size_t x) { return values[y * kImageSide + x]; }

  void add_noise(Rng& rng, double stddev) {
    if (stddev <= 0.0) return;
    std::normal_distribution<double> normal(0.0, stddev);
    for (auto& v : values) v += normal(rng);
  }

  // Mirrors values back into [0, 1] so strong noise does not pile up at the
  // clamp bounds.
  void fold() {
    for (auto& v : values) {
      v = std::fmod(std::abs(v), 2.0);
      if (v > 1.0) v = 2.0 - v;
    }
  }

  void emit(std::vector<float>& out) const {
    for (double v : values) out.push_back(static_cast<float>(std::clamp(v, 0.0, 1.0)));
  }
};

// Few soft Gaussian bumps on a flat background. Complexity adds bumps,
// contrast and sensor noise.
void draw_blobs(Rng& rng, double c, Canvas& canvas) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double background = 0.35 + 0.05 * (unit(rng) - 0.5);
  std::fill(canvas.values.begin(), canvas.values.end(), background);
  const auto blobs = static_cast<std::size_t>(1 + std::lround(5.0 * c));
  for (std::size_t b = 0; b < blobs; ++b) {
    const double cy = 4.0 + 24.0 * unit(rng);
    const double cx = 4.0 + 24.0 * unit(rng);
    const double radius = 2.0 + 4.0 * unit(rng);
    const double amplitude = (0.08 + 0.5 * c) * (0.5 + 0.5 * unit(rng));
    for (std::size_t y = 0; y < kImageSide; ++y) {
      for (std::size_t x = 0; x < kImageSide; ++x) {
        const double dy = static_cast<double>(y) - cy;
        const double dx = static_cast<double>(x) - cx;
        canvas.at(y, x) += amplitude * std::exp(-(dy * dy + dx * dx) / (2.0 * radius * radius));
      }
    }
  }
  canvas.add_noise(rng, 0.01 + 0.05 * c);
}

// Oriented sinusoidal grating; complexity raises frequency, contrast and noise.
void draw_stripes(Rng& rng, double c, Canvas& canvas) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double angle = std::numbers::pi * unit(rng);
  const double cycles = 1.0 + 6.0 * c * (0.75 + 0.5 * unit(rng));
  const double phase = kTwoPi * unit(rng);
  const double contrast = 0.05 + 0.3 * c;
  const double fy = std::sin(angle) * cycles / static_cast<double>(kImageSide);
  const double fx = std::cos(angle) * cycles / static_cast<double>(kImageSide);
  for (std::size_t y = 0; y < kImageSide; ++y) {
    for (std::size_t x = 0; x < kImageSide; ++x) {
      const double t = kTwoPi * (fy * static_cast<double>(y) + fx * static_cast<double>(x));
      canvas.at(y, x) = 0.5 + contrast * std::sin(t + phase);
    }
  }
  canvas.add_noise(rng, 0.01 + 0.1 * c);
}

// Smooth low-frequency random field around mid-gray plus white noise whose
// amplitude grows with complexity.
void draw_noise_texture(Rng& rng, double c, Canvas& canvas) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::fill(canvas.values.begin(), canvas.values.end(), 0.5);
  constexpr int kWaves = 4;
  const double amplitude = 0.04 + 0.06 * c;
  for (int k = 0; k < kWaves; ++k) {
    const double angle = kTwoPi * unit(rng);
    const double cycles = 0.5 + 2.5 * unit(rng);
    const double phase = kTwoPi * unit(rng);
    const double fy = std::sin(angle) * cycles / static_cast<double>(kImageSide);
    const double fx = std::cos(angle) * cycles / static_cast<double>(kImageSide);
    for (std::size_t y = 0; y < kImageSide; ++y) {
      for (std::size_t x = 0; x < kImageSide; ++x) {
        const double t = kTwoPi * (fy * static_cast<double>(y) + fx * static_cast<double>(x));
        canvas.at(y, x) += amplitude * std::sin(t + phase);
      }
    }
  }
  canvas.add_noise(rng, 0.01 + 0.3 * c);
  canvas.fold();
}

}  // namespace

std::string to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::kBlobs:
      return "blobs";
    case SynthKind::kStripes:
      return "stripes";
    case SynthKind::kNoiseTexture:
      return "noise-texture";
  }
  return "unknown";
}

SynthKind parse_synth_kind(const std::string& text) {
  if (text == "blobs") return SynthKind::kBlobs;
  if (text == "stripes") return SynthKind::kStripes;
  if (text == "noise-texture") return SynthKind::kNoiseTexture;
  throw ConfigError("unknown synthetic kind '" + text +
                    "' (expected blobs, stripes or noise-texture)");
}

ImageDataset synth_generate(const SyntheticSpec& spec, Split split) {
  if (spec.count == 0) throw ConfigError("synth_generate: count must be positive");
  if (!(spec.complexity >= 0.0 && spec.complexity <= 1.0)) {
    throw ConfigError("synth_generate: complexity must lie in [0, 1]");
  }
  Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(spec.kind)));
  std::vector<float> pixels;
  pixels.reserve(spec.count * kImagePixels);
  for (std::size_t i = 0; i < spec.count; ++i) {
    Canvas canvas;
    switch (spec.kind) {
      case SynthKind::kBlobs:
        draw_blobs(rng, spec.complexity, canvas);
        break;
      case SynthKind::kStripes:
        draw_stripes(rng, spec.complexity, canvas);
        break;
      case SynthKind::kNoiseTexture:
        draw_noise_texture(rng, spec.complexity, canvas);
        break;
    }
    canvas.emit(pixels);
  }
  char label[32];
  std::snprintf(label, sizeof label, "%.2f", spec.complexity);
  return ImageDataset(to_string(spec.kind) + "-c" + label, split, Source::kSynthetic,
                      std::move(pixels));
}

double pixel_entropy(std::span<const float> image, std::size_t bins) {
  if (bins == 0 || image.empty()) throw std::invalid_argument("pixel_entropy: empty input");
  std::vector<std::size_t> counts(bins, 0);
  for (float v : image) {
    auto b = static_cast<std::size_t>(std::clamp(v, 0.0f, 1.0f) * static_cast<float>(bins));
    ++counts[std::min(b, bins - 1)];
  }
  double entropy = 0.0;
  const auto n = static_cast<double>(image.size());
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    entropy -= p * std::log(p);
  }
  return entropy;
}

}  // namespace bpvae::data
