#include <bit>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "bpvae/cli.hpp"
#include "bpvae/error.hpp"

namespace bpvae::cli {
namespace {

std::string format_float(float value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(value));
  return buf;
}

std::string shape_text(const Shape& shape) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(shape[i]);
  }
  return out;
}

std::string to_string(models::SimpleKlTarget t) {
  return t == models::SimpleKlTarget::kBasicPrior ? "basic" : "simple";
}

class HeaderReader {
 public:
  HeaderReader(std::map<std::string, std::string> fields, std::string origin)
      : fields_(std::move(fields)), origin_(std::move(origin)) {}

  const std::string& text(const std::string& key) const {
    auto it = fields_.find(key);
    if (it == fields_.end()) throw DataError(origin_ + ": header is missing '" + key + "'");
    return it->second;
  }

  template <typename T>
  T number(const std::string& key) const {
    const std::string& s = text(key);
    T value{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
      throw DataError(origin_ + ": header field '" + key + "' is not a number: '" + s + "'");
    }
    return value;
  }

 private:
  std::map<std::string, std::string> fields_;
  std::string origin_;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  const models::Model& m = checkpoint.model;
  const models::Architecture& a = m.network.architecture();
  std::ostringstream h;
  h << kCheckpointMagic << '\n';
  h << "format_version " << kCheckpointVersion << '\n';
  h << "architecture.image_side " << a.image_side << '\n';
  h << "architecture.channels1 " << a.channels1 << '\n';
  h << "architecture.channels2 " << a.channels2 << '\n';
  h << "architecture.kernel " << a.kernel << '\n';
  h << "architecture.latent_dim " << a.latent_dim << '\n';
  h << "architecture.leaky_slope " << format_float(a.leaky_slope) << '\n';
  const auto layout = models::parameter_layout(a);
  std::size_t floats = 0;
  for (const auto& p : layout) {
    h << "layer " << p.name << ' ' << shape_text(p.shape) << '\n';
    floats += shape_numel(p.shape);
  }
  h << "prior.basic_sigma " << format_float(m.basic_prior.sigma) << '\n';
  std::string sigmas;
  for (std::size_t i = 0; i < m.simple_priors.size(); ++i) {
    if (i) sigmas += ',';
    sigmas += format_float(m.simple_priors[i].sigma);
  }
  h << "prior.simple_sigmas " << sigmas << '\n';
  h << "prior.simple_kl " << to_string(m.simple_kl) << '\n';
  for (const auto& [key, value] : checkpoint.config_echo) {
    h << "config." << key << ' ' << value << '\n';
  }
  h << "final_loss " << eval::format_number(checkpoint.final_loss) << '\n';
  h << "payload_floats " << floats << '\n';
  h << '\n';

  std::string out = h.str();
  const std::size_t header = out.size();
  out.resize(header + floats * 4);
  char* dst = out.data() + header;
  for (const auto& p : m.network.parameters()) {
    for (float v : p.data()) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      std::memcpy(dst, &bits, 4);
      dst += 4;
    }
  }
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes, const std::string& origin) {
  const std::string magic_line = std::string(kCheckpointMagic) + "\n";
  if (bytes.compare(0, magic_line.size(), magic_line) != 0) {
    throw DataError(origin + ": bad magic, expected " + kCheckpointMagic);
  }
  std::size_t pos = magic_line.size();
  std::map<std::string, std::string> fields;
  std::vector<std::pair<std::string, std::string>> layers;
  std::map<std::string, std::string> echo;
  bool terminated = false;
  while (pos < bytes.size()) {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) break;
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) {
      terminated = true;
      break;
    }
    const auto sp = line.find(' ');
    const std::string key = line.substr(0, sp);
    const std::string value = sp == std::string::npos ? "" : line.substr(sp + 1);
    if (key == "layer") {
      const auto sp2 = value.find(' ');
      layers.emplace_back(value.substr(0, sp2),
                          sp2 == std::string::npos ? "" : value.substr(sp2 + 1));
    } else if (key.rfind("config.", 0) == 0) {
      echo[key.substr(7)] = value;
    } else {
      fields[key] = value;
    }
  }
  if (!terminated) throw DataError(origin + ": header is not terminated by a blank line");

  HeaderReader r(fields, origin);
  if (r.number<int>("format_version") != kCheckpointVersion) {
    throw DataError(origin + ": unsupported format_version " + r.text("format_version"));
  }
  models::Architecture a;
  a.image_side = r.number<std::size_t>("architecture.image_side");
  a.channels1 = r.number<std::size_t>("architecture.channels1");
  a.channels2 = r.number<std::size_t>("architecture.channels2");
  a.kernel = r.number<std::size_t>("architecture.kernel");
  a.latent_dim = r.number<std::size_t>("architecture.latent_dim");
  a.leaky_slope = r.number<float>("architecture.leaky_slope");
  try {
    a.validate();
  } catch (const std::exception& e) {
    throw DataError(origin + ": invalid architecture: " + e.what());
  }

  const auto layout = models::parameter_layout(a);
  if (layers.size() != layout.size()) {
    throw DataError(origin + ": header lists " + std::to_string(layers.size()) +
                    " layers, architecture has " + std::to_string(layout.size()));
  }
  std::size_t expected = 0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layers[i].first != layout[i].name || layers[i].second != shape_text(layout[i].shape)) {
      throw DataError(origin + ": layer " + std::to_string(i) + " is '" + layers[i].first + " " +
                      layers[i].second + "', expected '" + layout[i].name + " " +
                      shape_text(layout[i].shape) + "'");
    }
    expected += shape_numel(layout[i].shape);
  }
  const auto declared = r.number<std::size_t>("payload_floats");
  const std::size_t payload = bytes.size() - pos;
  if (declared != expected || payload != expected * 4) {
    throw DataError(origin + ": payload length " + std::to_string(payload) +
                    " bytes, header declares " + std::to_string(declared) +
                    " floats, layout requires " + std::to_string(expected) + " floats (" +
                    std::to_string(expected * 4) + " bytes)");
  }

  std::vector<Tensor> params;
  const char* src = bytes.data() + pos;
  for (const auto& p : layout) {
    std::vector<float> values(shape_numel(p.shape));
    for (float& v : values) {
      std::uint32_t bits;
      std::memcpy(&bits, src, 4);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      v = std::bit_cast<float>(bits);
      src += 4;
    }
    params.emplace_back(p.shape, std::move(values), true);
  }

  Checkpoint c{models::Model{models::Network(a, std::move(params)), {}, {}, {}}, echo, 0.0};
  c.model.basic_prior = {r.number<float>("prior.basic_sigma"), models::PriorRole::kBasic};
  for (const auto& s : split_list(r.text("prior.simple_sigmas"))) {
    float sigma{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), sigma);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw DataError(origin + ": bad simple sigma '" + s + "'");
    }
    c.model.simple_priors.push_back({sigma, models::PriorRole::kSimple});
  }
  const std::string& kl = r.text("prior.simple_kl");
  if (kl != "simple" && kl != "basic") throw DataError(origin + ": bad prior.simple_kl '" + kl + "'");
  c.model.simple_kl =
      kl == "basic" ? models::SimpleKlTarget::kBasicPrior : models::SimpleKlTarget::kSimplePrior;
  try {
    models::validate_priors(c.model.basic_prior, c.model.simple_priors);
  } catch (const ConfigError& e) {
    throw DataError(origin + ": " + e.what());
  }
  c.final_loss = r.text("final_loss") == "nan" ? std::numeric_limits<double>::quiet_NaN()
                                               : r.number<double>("final_loss");
  return c;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw DataError("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw DataError("cannot rename into " + path.string());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_file_atomic(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path.string());
  std::ostringstream bytes;
  bytes << in.rdbuf();
  return parse_checkpoint(bytes.str(), "checkpoint " + path.string());
}

std::string encode_pgm(std::span<const float> image, std::size_t height, std::size_t width) {
  if (image.size() != height * width) {
    throw ShapeError("encode_pgm: " + std::to_string(image.size()) + " pixels for " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  for (float v : image) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0f))));
  }
  return out;
}

}  // namespace bpvae::cli
