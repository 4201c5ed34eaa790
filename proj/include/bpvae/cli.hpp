#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bpvae/data.hpp"
#include "bpvae/eval.hpp"
#include "bpvae/model.hpp"

namespace bpvae::cli {

// ---------------------------------------------------------------------------
// Configuration
//
// A config file holds one `key = value` pair per line; `#` starts a comment.
// Every key below is also a command-line flag of the same name.

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

const std::vector<ConfigKey>& config_keys();

using ConfigValues = std::map<std::string, std::string>;

// Parses config text. Throws ConfigError on malformed lines or unknown keys.
ConfigValues parse_config_text(const std::string& text, const std::string& origin = "config");
ConfigValues read_config_file(const std::filesystem::path& path);

enum class Mode { kVae, kBpvae };

struct RunConfig {
  Mode mode = Mode::kBpvae;
  std::string basic;                 // dataset spec
  std::vector<std::string> simples;  // dataset specs
  float basic_sigma = 1.0f;
  std::vector<float> simple_sigmas;  // one per simple spec
  models::SimpleKlTarget simple_kl = models::SimpleKlTarget::kSimplePrior;
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  float learning_rate = 1e-4f;
  std::size_t latent_dim = 32;
  std::uint64_t seed = 0;
  std::filesystem::path out = ".";
  std::optional<std::size_t> limit;
  std::size_t workers = 1;

  std::string checkpoint;
  std::string detect_id;
  std::string detect_ood;
  std::size_t bins = 50;
  std::string reconstruct_dataset;
  std::size_t reconstruct_count = 16;
  std::vector<std::string> candidates;
  eval::Statistic statistic = eval::Statistic::kMean;
  std::vector<std::string> report_checkpoints;

  models::Architecture architecture() const;
  models::TrainConfig train_config() const;
};

// Defaults overlaid by `values`; validates types, ranges, and prior ordering.
// Throws ConfigError.
RunConfig resolve_config(const ConfigValues& values);

// ---------------------------------------------------------------------------
// Dataset specs
//
//   idx:PATH
//   rawrgb:PATH
//   synth:KIND:COMPLEXITY:COUNT:SEED

// Throws ConfigError on a malformed spec and DataError on unreadable files.
data::ImageDataset load_dataset(const std::string& spec, std::optional<std::size_t> limit,
                                data::Split split);

std::vector<std::string> split_list(const std::string& text);

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr const char* kCheckpointMagic = "BPVAE1";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  models::Model model;
  std::map<std::string, std::string> config_echo;
  double final_loss = 0.0;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
// Throws DataError with a diagnostic on bad magic, malformed header, shape
// mismatches, or a payload length that disagrees with the declared layout.
Checkpoint parse_checkpoint(const std::string& bytes, const std::string& origin = "checkpoint");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Writes `content` to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// Binary 8-bit grayscale PGM (P5).
std::string encode_pgm(std::span<const float> image, std::size_t height, std::size_t width);

// ---------------------------------------------------------------------------
// Commands. Each writes its outputs under config.out and returns 0; failures
// are reported by exception (ConfigError, DataError, DivergenceError).

int cmd_train(const RunConfig& config, std::ostream& log);
int cmd_detect(const RunConfig& config, std::ostream& log);
int cmd_reconstruct(const RunConfig& config, std::ostream& log);
int cmd_select_simple(const RunConfig& config, std::ostream& log);
int cmd_report(const RunConfig& config, std::ostream& log);

// Parses argv (verb first) and runs it. Errors are printed to `err` as one
// line `error: kind=<kind> message="<text>"`. Exit codes: 0 success, 2
// config, 3 data, 4 divergence.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitDivergence = 4;

}  // namespace bpvae::cli
