#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "bpvae/data.hpp"
#include "bpvae/error.hpp"

namespace bpvae::data {
namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(std::string(what) + ": cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
  return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
         (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<std::uint32_t>(bytes[offset + 3]);
}

void put_be32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                              static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), 4);
}

std::string fail_at(const std::filesystem::path& path, std::size_t offset,
                    const std::string& msg) {
  return "load: " + path.string() + ": byte offset " + std::to_string(offset) + ": " + msg;
}

std::string dataset_name(const std::filesystem::path& path) { return path.stem().string(); }

std::size_t apply_limit(std::size_t count, std::optional<std::size_t> limit,
                        const std::filesystem::path& path) {
  const std::size_t n = limit ? std::min(*limit, count) : count;
  if (n == 0) throw DataError("load: " + path.string() + ": no images selected");
  return n;
}

void to_unit_and_resize(const std::uint8_t* bytes, std::size_t rows, std::size_t cols,
                        std::vector<float>& out) {
  std::vector<float> native(rows * cols);
  for (std::size_t i = 0; i < native.size(); ++i) native[i] = bytes[i] / 255.0f;
  auto resized = resize_bilinear(native, rows, cols, kImageSide, kImageSide);
  out.insert(out.end(), resized.begin(), resized.end());
}

}  // namespace

std::vector<float> resize_bilinear(std::span<const float> image, std::size_t in_height,
                                   std::size_t in_width, std::size_t out_height,
                                   std::size_t out_width) {
  if (in_height == 0 || in_width == 0 || out_height == 0 || out_width == 0 ||
      image.size() != in_height * in_width) {
    throw ShapeError("resize_bilinear: image of " + std::to_string(image.size()) +
                     " values does not match " + std::to_string(in_height) + "x" +
                     std::to_string(in_width));
  }
  // Source coordinates for one output axis: (index, next index, weight of next).
  struct Tap {
    std::size_t lo;
    std::size_t hi;
    float weight;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> result(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
      double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto lo = static_cast<std::size_t>(std::floor(src));
      const std::size_t hi = std::min(lo + 1, in - 1);
      result[i] = Tap{lo, hi, static_cast<float>(src - static_cast<double>(lo))};
    }
    return result;
  };
  const auto ys = taps(in_height, out_height);
  const auto xs = taps(in_width, out_width);
  std::vector<float> out(out_height * out_width);
  for (std::size_t y = 0; y < out_height; ++y) {
    const float* row0 = image.data() + ys[y].lo * in_width;
    const float* row1 = image.data() + ys[y].hi * in_width;
    const float wy = ys[y].weight;
    for (std::size_t x = 0; x < out_width; ++x) {
      const float wx = xs[x].weight;
      const float top = row0[xs[x].lo] * (1.0f - wx) + row0[xs[x].hi] * wx;
      const float bottom = row1[xs[x].lo] * (1.0f - wx) + row1[xs[x].hi] * wx;
      out[y * out_width + x] = std::clamp(top * (1.0f - wy) + bottom * wy, 0.0f, 1.0f);
    }
  }
  return out;
}

std::vector<float> to_grayscale(std::span<const float> rgb, std::size_t height,
                                std::size_t width, std::size_t channels) {
  if (channels != 3) {
    throw ShapeError("to_grayscale: expected 3 channels, got " + std::to_string(channels));
  }
  if (rgb.size() != height * width * 3) {
    throw ShapeError("to_grayscale: " + std::to_string(rgb.size()) +
                     " values do not form a " + std::to_string(height) + "x" +
                     std::to_string(width) + "x3 image");
  }
  std::vector<float> gray(height * width);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const float y = 0.299f * rgb[3 * i] + 0.587f * rgb[3 * i + 1] + 0.114f * rgb[3 * i + 2];
    gray[i] = std::clamp(y, 0.0f, 1.0f);
  }
  return gray;
}

ImageDataset load_idx(const std::filesystem::path& path, std::optional<std::size_t> limit,
                      Split split) {
  const auto bytes = read_file(path, "load_idx");
  if (bytes.size() < 4) throw DataError(fail_at(path, bytes.size(), "file shorter than magic"));
  if (bytes[0] != 0 || bytes[1] != 0) {
    std::ostringstream msg;
    msg << "bad magic 0x" << std::hex << read_be32(bytes, 0) << ", expected 0x00000803";
    throw DataError(fail_at(path, 0, msg.str()));
  }
  if (bytes[2] != 0x08) {
    throw DataError(fail_at(path, 2, "element type " + std::to_string(bytes[2]) +
                                         " is not unsigned byte (8)"));
  }
  if (bytes[3] != 3) {
    throw DataError(fail_at(path, 3, "rank " + std::to_string(bytes[3]) + " is not 3"));
  }
  constexpr std::size_t kHeader = 16;
  if (bytes.size() < kHeader) {
    throw DataError(fail_at(path, bytes.size(), "header truncated, need 16 bytes"));
  }
  const std::size_t count = read_be32(bytes, 4);
  const std::size_t rows = read_be32(bytes, 8);
  const std::size_t cols = read_be32(bytes, 12);
  if (count == 0 || rows == 0 || cols == 0) {
    throw DataError(fail_at(path, 4, "zero dimension in header"));
  }
  const std::size_t expected = kHeader + count * rows * cols;
  if (bytes.size() < expected) {
    throw DataError(fail_at(path, bytes.size(),
                            "payload truncated, header declares " + std::to_string(expected) +
                                " bytes"));
  }
  const std::size_t n = apply_limit(count, limit, path);
  std::vector<float> pixels;
  pixels.reserve(n * kImagePixels);
  for (std::size_t i = 0; i < n; ++i) {
    to_unit_and_resize(bytes.data() + kHeader + i * rows * cols, rows, cols, pixels);
  }
  return ImageDataset(dataset_name(path), split, Source::kIdx, std::move(pixels));
}

ImageDataset load_rawrgb(const std::filesystem::path& path, std::optional<std::size_t> limit,
                         Split split) {
  const auto bytes = read_file(path, "load_rawrgb");
  const auto newline = std::find(bytes.begin(), bytes.end(), std::uint8_t{'\n'});
  if (newline == bytes.end()) throw DataError(fail_at(path, 0, "missing RAWRGB header line"));
  const std::string header(bytes.begin(), newline);
  std::istringstream fields(header);
  std::string magic;
  long long count = 0, height = 0, width = 0;
  std::string trailing;
  if (!(fields >> magic >> count >> height >> width) || magic != "RAWRGB" ||
      (fields >> trailing) || count <= 0 || height <= 0 || width <= 0) {
    throw DataError(fail_at(path, 0, "malformed header '" + header + "'"));
  }
  const std::size_t offset = header.size() + 1;
  const std::size_t plane = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  const std::size_t per_image = 3 * plane;
  const std::size_t expected = offset + static_cast<std::size_t>(count) * per_image;
  if (bytes.size() < expected) {
    throw DataError(fail_at(path, bytes.size(),
                            "payload truncated, header declares " + std::to_string(expected) +
                                " bytes"));
  }
  const std::size_t n = apply_limit(static_cast<std::size_t>(count), limit, path);
  const auto h = static_cast<std::size_t>(height);
  const auto w = static_cast<std::size_t>(width);
  std::vector<float> pixels;
  pixels.reserve(n * kImagePixels);
  std::vector<float> interleaved(per_image);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* img = bytes.data() + offset + i * per_image;
    for (std::size_t p = 0; p < plane; ++p) {
      for (std::size_t c = 0; c < 3; ++c) interleaved[3 * p + c] = img[c * plane + p] / 255.0f;
    }
    auto gray = to_grayscale(interleaved, h, w, 3);
    auto resized = resize_bilinear(gray, h, w, kImageSide, kImageSide);
    pixels.insert(pixels.end(), resized.begin(), resized.end());
  }
  return ImageDataset(dataset_name(path), split, Source::kRawRgb, std::move(pixels));
}

void write_idx(const std::filesystem::path& path, std::span<const std::uint8_t> pixels,
               std::size_t count, std::size_t rows, std::size_t cols) {
  if (pixels.size() != count * rows * cols) throw ShapeError("write_idx: size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("write_idx: cannot open " + path.string());
  put_be32(out, 0x00000803u);
  put_be32(out, static_cast<std::uint32_t>(count));
  put_be32(out, static_cast<std::uint32_t>(rows));
  put_be32(out, static_cast<std::uint32_t>(cols));
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
}

void write_rawrgb(const std::filesystem::path& path, std::span<const std::uint8_t> planar,
                  std::size_t count, std::size_t height, std::size_t width) {
  if (planar.size() != count * 3 * height * width) throw ShapeError("write_rawrgb: size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("write_rawrgb: cannot open " + path.string());
  out << "RAWRGB " << count << ' ' << height << ' ' << width << '\n';
  out.write(reinterpret_cast<const char*>(planar.data()),
            static_cast<std::streamsize>(planar.size()));
}

}  // namespace bpvae::data
