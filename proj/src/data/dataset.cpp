#include <algorithm>
#include <numeric>
#include <utility>

#include "bpvae/data.hpp"
#include "bpvae/error.hpp"
#include "bpvae/random.hpp"

namespace bpvae::data {

std::string to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

std::string to_string(Source source) {
  switch (source) {
    case Source::kIdx:
      return "idx";
    case Source::kRawRgb:
      return "rawrgb";
    case Source::kSynthetic:
      return "synthetic";
  }
  return "unknown";
}

ImageDataset::ImageDataset(std::string name, Split split, Source source,
                           std::vector<float> pixels)
    : name_(std::move(name)), split_(split), source_(source), pixels_(std::move(pixels)) {
  if (pixels_.empty() || pixels_.size() % kImagePixels != 0) {
    throw DataError("dataset '" + name_ + "': " + std::to_string(pixels_.size()) +
                    " pixels is not a positive multiple of 32x32");
  }
  for (std::size_t i = 0; i < pixels_.size(); ++i) {
    const float v = pixels_[i];
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw DataError("dataset '" + name_ + "': pixel " + std::to_string(i) + " = " +
                      std::to_string(v) + " outside [0, 1]");
    }
  }
}

std::span<const float> ImageDataset::image(std::size_t index) const {
  if (index >= size()) {
    throw std::out_of_range("dataset '" + name_ + "': image " + std::to_string(index) +
                            " of " + std::to_string(size()));
  }
  return std::span<const float>(pixels_).subspan(index * kImagePixels, kImagePixels);
}

Tensor ImageDataset::batch(std::span<const std::size_t> indices) const {
  std::vector<float> values;
  values.reserve(indices.size() * kImagePixels);
  for (std::size_t index : indices) {
    auto img = image(index);
    values.insert(values.end(), img.begin(), img.end());
  }
  return Tensor({indices.size(), 1, kImageSide, kImageSide}, std::move(values));
}

Tensor ImageDataset::range(std::size_t start, std::size_t count) const {
  std::vector<std::size_t> indices(count);
  std::iota(indices.begin(), indices.end(), start);
  return batch(indices);
}

ImageDataset ImageDataset::head(std::size_t count) const {
  return slice(0, std::min(count, size()), name_, split_);
}

ImageDataset ImageDataset::slice(std::size_t start, std::size_t count, std::string name,
                                 Split split) const {
  if (count == 0 || start + count > size()) {
    throw std::out_of_range("dataset '" + name_ + "': slice out of range");
  }
  auto begin = pixels_.begin() + static_cast<std::ptrdiff_t>(start * kImagePixels);
  std::vector<float> values(begin, begin + static_cast<std::ptrdiff_t>(count * kImagePixels));
  return ImageDataset(std::move(name), split, source_, std::move(values));
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, bool shuffle) {
  if (batch_size == 0) throw std::invalid_argument("batch_indices: batch_size must be positive");
  if (n == 0) throw std::invalid_argument("batch_indices: empty dataset");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) {
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

CyclicSampler::CyclicSampler(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed) {
  if (n == 0) throw std::invalid_argument("CyclicSampler: empty dataset");
  refill();
}

void CyclicSampler::refill() {
  order_.resize(n_);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  Rng rng(derive_seed(seed_, pass_++));
  std::shuffle(order_.begin(), order_.end(), rng);
  cursor_ = 0;
}

std::vector<std::size_t> CyclicSampler::next(std::size_t count) {
  std::vector<std::size_t> out;
  out.reserve(count);
  while (out.size() < count) {
    if (cursor_ == order_.size()) refill();
    out.push_back(order_[cursor_++]);
  }
  return out;
}

}  // namespace bpvae::data
