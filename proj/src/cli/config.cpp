#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bpvae/cli.hpp"
#include "bpvae/error.hpp"

namespace bpvae::cli {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError(key + ": cannot parse '" + text + "' as a number");
  }
  return value;
}

std::size_t parse_positive(const std::string& key, const std::string& text) {
  if (!text.empty() && text.front() == '-') {
    throw ConfigError(key + ": must be a positive integer, got '" + text + "'");
  }
  const auto v = parse_number<std::size_t>(key, text);
  if (v == 0) throw ConfigError(key + ": must be a positive integer, got 0");
  return v;
}

float parse_float(const std::string& key, const std::string& text) {
  const auto v = parse_number<float>(key, text);
  if (!std::isfinite(v)) throw ConfigError(key + ": must be finite");
  return v;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"mode", "bpvae", "vae or bpvae"},
      {"data.basic", "", "basic (in-distribution) dataset spec"},
      {"data.simples", "", "comma-separated simple dataset specs"},
      {"priors.basic_sigma", "1.0", "standard deviation of the basic prior"},
      {"priors.simple_sigma", "0.1", "simple prior sigma, one value or one per simple dataset"},
      {"priors.simple_kl", "simple", "prior for the simple branches' KL term: simple or basic"},
      {"train.epochs", "200", "training epochs"},
      {"train.batch_size", "64", "minibatch size per dataset"},
      {"train.learning_rate", "0.0001", "Adam learning rate"},
      {"model.latent_dim", "32", "latent dimensionality"},
      {"seed", "0", "base random seed"},
      {"out", ".", "output directory"},
      {"limit", "", "maximum images loaded per dataset"},
      {"workers", "1", "scoring threads"},
      {"checkpoint", "", "checkpoint path for detect and reconstruct"},
      {"detect.id", "", "in-distribution test dataset spec"},
      {"detect.ood", "", "out-of-distribution test dataset spec"},
      {"detect.bins", "50", "histogram bins"},
      {"reconstruct.dataset", "", "dataset spec to reconstruct"},
      {"reconstruct.count", "16", "number of images to reconstruct and dump"},
      {"select.candidates", "", "comma-separated candidate dataset specs"},
      {"select.statistic", "mean", "mean or median of per-sample ELBOs"},
      {"report.checkpoints", "", "comma-separated checkpoints to compare"},
  };
  return keys;
}

ConfigValues parse_config_text(const std::string& text, const std::string& origin) {
  ConfigValues values;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    bool known = false;
    for (const auto& k : config_keys()) known = known || k.name == key;
    if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
    values[key] = trim(line.substr(eq + 1));
  }
  return values;
}

ConfigValues read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str(), path.string());
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

models::Architecture RunConfig::architecture() const {
  models::Architecture arch;
  arch.latent_dim = latent_dim;
  return arch;
}

models::TrainConfig RunConfig::train_config() const {
  models::TrainConfig tc;
  tc.epochs = epochs;
  tc.learning_rate = learning_rate;
  tc.batch_size = batch_size;
  tc.seed = seed;
  return tc;
}

RunConfig resolve_config(const ConfigValues& overrides) {
  ConfigValues v;
  for (const auto& k : config_keys()) v[k.name] = k.default_value;
  for (const auto& [key, value] : overrides) {
    if (!v.count(key)) throw ConfigError("unknown key '" + key + "'");
    v[key] = value;
  }

  RunConfig c;
  const std::string& mode = v["mode"];
  if (mode == "vae") {
    c.mode = Mode::kVae;
  } else if (mode == "bpvae") {
    c.mode = Mode::kBpvae;
  } else {
    throw ConfigError("mode: expected vae or bpvae, got '" + mode + "'");
  }
  c.basic = v["data.basic"];
  c.simples = split_list(v["data.simples"]);
  c.basic_sigma = parse_float("priors.basic_sigma", v["priors.basic_sigma"]);
  for (const auto& s : split_list(v["priors.simple_sigma"])) {
    c.simple_sigmas.push_back(parse_float("priors.simple_sigma", s));
  }
  if (c.simple_sigmas.empty()) throw ConfigError("priors.simple_sigma: no value");
  if (c.mode == Mode::kBpvae && c.simple_sigmas.size() == 1 && c.simples.size() > 1) {
    c.simple_sigmas.assign(c.simples.size(), c.simple_sigmas.front());
  }
  if (c.mode == Mode::kBpvae && !c.simples.empty() &&
      c.simple_sigmas.size() != c.simples.size()) {
    throw ConfigError("priors.simple_sigma: " + std::to_string(c.simple_sigmas.size()) +
                      " values for " + std::to_string(c.simples.size()) + " simple datasets");
  }
  std::vector<models::PriorSpec> simple_priors;
  for (float s : c.simple_sigmas) simple_priors.push_back({s, models::PriorRole::kSimple});
  models::validate_priors({c.basic_sigma, models::PriorRole::kBasic}, simple_priors);

  const std::string& kl = v["priors.simple_kl"];
  if (kl == "simple") {
    c.simple_kl = models::SimpleKlTarget::kSimplePrior;
  } else if (kl == "basic") {
    c.simple_kl = models::SimpleKlTarget::kBasicPrior;
  } else {
    throw ConfigError("priors.simple_kl: expected simple or basic, got '" + kl + "'");
  }

  c.epochs = parse_positive("train.epochs", v["train.epochs"]);
  c.batch_size = parse_positive("train.batch_size", v["train.batch_size"]);
  c.learning_rate = parse_float("train.learning_rate", v["train.learning_rate"]);
  if (c.learning_rate <= 0.0f) throw ConfigError("train.learning_rate: must be positive");
  c.latent_dim = parse_positive("model.latent_dim", v["model.latent_dim"]);
  c.seed = parse_number<std::uint64_t>("seed", v["seed"]);
  if (v["out"].empty()) throw ConfigError("out: empty path");
  c.out = v["out"];
  if (!v["limit"].empty()) c.limit = parse_positive("limit", v["limit"]);
  c.workers = parse_positive("workers", v["workers"]);

  c.checkpoint = v["checkpoint"];
  c.detect_id = v["detect.id"];
  c.detect_ood = v["detect.ood"];
  c.bins = parse_positive("detect.bins", v["detect.bins"]);
  c.reconstruct_dataset = v["reconstruct.dataset"];
  c.reconstruct_count = parse_positive("reconstruct.count", v["reconstruct.count"]);
  c.candidates = split_list(v["select.candidates"]);
  const std::string& stat = v["select.statistic"];
  if (stat == "mean") {
    c.statistic = eval::Statistic::kMean;
  } else if (stat == "median") {
    c.statistic = eval::Statistic::kMedian;
  } else {
    throw ConfigError("select.statistic: expected mean or median, got '" + stat + "'");
  }
  c.report_checkpoints = split_list(v["report.checkpoints"]);
  return c;
}

data::ImageDataset load_dataset(const std::string& spec, std::optional<std::size_t> limit,
                                data::Split split) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    throw ConfigError("dataset spec '" + spec + "': expected idx:PATH, rawrgb:PATH or "
                      "synth:KIND:COMPLEXITY:COUNT:SEED");
  }
  const std::string scheme = spec.substr(0, colon);
  const std::string rest = spec.substr(colon + 1);
  if (scheme == "idx") return data::load_idx(rest, limit, split);
  if (scheme == "rawrgb") return data::load_rawrgb(rest, limit, split);
  if (scheme != "synth") throw ConfigError("dataset spec '" + spec + "': unknown scheme");

  std::vector<std::string> fields;
  std::istringstream in(rest);
  std::string f;
  while (std::getline(in, f, ':')) fields.push_back(f);
  if (fields.size() != 4) {
    throw ConfigError("dataset spec '" + spec + "': expected synth:KIND:COMPLEXITY:COUNT:SEED");
  }
  data::SyntheticSpec s;
  s.kind = data::parse_synth_kind(fields[0]);
  s.complexity = parse_number<double>(spec, fields[1]);
  s.count = parse_positive(spec, fields[2]);
  s.seed = parse_number<std::uint64_t>(spec, fields[3]);
  if (limit) s.count = std::min(s.count, *limit);
  return data::synth_generate(s, split);
}

}  // namespace bpvae::cli
