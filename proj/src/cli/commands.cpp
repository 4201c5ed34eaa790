#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "bpvae/cli.hpp"
#include "bpvae/error.hpp"
#include "bpvae/ops.hpp"

namespace bpvae::cli {
namespace {

using eval::format_number;

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += items[i];
  }
  return out;
}

// Training-relevant settings only; output paths stay out so that runs into
// different directories produce identical checkpoints.
std::map<std::string, std::string> config_echo(const RunConfig& c) {
  std::vector<std::string> sigmas;
  for (float s : c.simple_sigmas) sigmas.push_back(format_number(s));
  return {
      {"mode", c.mode == Mode::kVae ? "vae" : "bpvae"},
      {"data.basic", c.basic},
      {"data.simples", c.mode == Mode::kVae ? "" : join(c.simples)},
      {"priors.basic_sigma", format_number(c.basic_sigma)},
      {"priors.simple_sigma", c.mode == Mode::kVae ? "" : join(sigmas)},
      {"train.epochs", std::to_string(c.epochs)},
      {"train.batch_size", std::to_string(c.batch_size)},
      {"train.learning_rate", format_number(c.learning_rate)},
      {"model.latent_dim", std::to_string(c.latent_dim)},
      {"seed", std::to_string(c.seed)},
      {"limit", c.limit ? std::to_string(*c.limit) : ""},
  };
}

void require(const std::string& value, const char* key) {
  if (value.empty()) throw ConfigError(std::string(key) + ": required");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

struct ReconstructionMetrics {
  double mse;
  double psnr;
  double ssim;
  std::vector<float> reconstructed;
};

// Posterior-mean reconstructions (zero noise) of the first `count` images.
ReconstructionMetrics reconstruct_head(const models::Model& model,
                                       const data::ImageDataset& dataset, std::size_t count) {
  Tape tape;
  tape.set_recording(false);
  ReconstructionMetrics r{};
  const std::size_t latent = model.network.architecture().latent_dim;
  constexpr std::size_t kChunk = 128;
  for (std::size_t start = 0; start < count; start += kChunk) {
    const std::size_t n = std::min(kChunk, count - start);
    Tensor out = models::reconstruct(tape, model.network, dataset.range(start, n),
                                     Tensor::zeros({n, latent}));
    r.reconstructed.insert(r.reconstructed.end(), out.data().begin(), out.data().end());
  }
  const auto original = dataset.pixels().subspan(0, count * data::kImagePixels);
  r.mse = eval::mse(original, r.reconstructed);
  r.psnr = eval::psnr_from_mse(r.mse);
  r.ssim = eval::ssim(original, r.reconstructed);
  return r;
}

struct Detection {
  eval::ScoreSet scores;
  double auroc;
  double auprc;
  double mean_id;
  double mean_ood;
};

Detection detect(const models::Model& model, const data::ImageDataset& id,
                 const data::ImageDataset& ood, const RunConfig& c) {
  const eval::ScoreOptions options{c.seed, c.workers};
  Detection d{};
  d.scores = eval::score_dataset(model, id, eval::Label::kId, options);
  eval::ScoreSet ood_scores = eval::score_dataset(model, ood, eval::Label::kOod, options);
  if (id.name() == ood.name()) {
    for (auto& e : d.scores.entries) e.dataset += "#id";
    for (auto& e : ood_scores.entries) e.dataset += "#ood";
  }
  d.scores.append(ood_scores.entries);
  d.auroc = eval::auroc(d.scores);
  d.auprc = eval::auprc(d.scores);
  const auto id_values = d.scores.scores(eval::Label::kId);
  const auto ood_values = d.scores.scores(eval::Label::kOod);
  d.mean_id = eval::mean(id_values);
  d.mean_ood = eval::mean(ood_values);
  return d;
}

std::string metrics_csv(const std::vector<std::pair<std::string, double>>& rows) {
  std::ostringstream out;
  eval::write_metrics_csv(out, rows);
  return out.str();
}

}  // namespace

int cmd_train(const RunConfig& c, std::ostream& log) {
  require(c.basic, "data.basic");
  if (c.mode == Mode::kBpvae && c.simples.empty()) {
    throw ConfigError("mode=bpvae requires at least one data.simples entry");
  }
  const data::ImageDataset basic = load_dataset(c.basic, c.limit, data::Split::kTrain);
  std::vector<data::ImageDataset> simples;
  if (c.mode == Mode::kBpvae) {
    for (const auto& s : c.simples) simples.push_back(load_dataset(s, c.limit, data::Split::kTrain));
  }
  models::Model model =
      c.mode == Mode::kVae
          ? models::make_vae(c.architecture(), c.basic_sigma, c.seed)
          : models::make_bpvae(c.architecture(), c.basic_sigma, c.simple_sigmas, c.seed, c.simple_kl);

  models::TrainConfig tc = c.train_config();
  tc.on_epoch = [&log](std::size_t epoch, double loss) {
    log << "epoch " << epoch << " loss " << format_number(loss) << '\n';
  };
  const models::TrainResult result = models::train(model, basic, simples, tc);

  std::ostringstream loss_csv;
  loss_csv << "epoch,loss\n";
  for (std::size_t e = 0; e < result.epoch_losses.size(); ++e) {
    loss_csv << e << ',' << format_number(result.epoch_losses[e]) << '\n';
  }
  Checkpoint ckpt{std::move(model), config_echo(c), result.epoch_losses.back()};
  save_checkpoint(c.out / "model.ckpt", ckpt);
  write_file_atomic(c.out / "loss.csv", loss_csv.str());
  log << "wrote " << (c.out / "model.ckpt").string() << '\n';
  return kExitOk;
}

int cmd_detect(const RunConfig& c, std::ostream& log) {
  require(c.checkpoint, "checkpoint");
  require(c.detect_id, "detect.id");
  require(c.detect_ood, "detect.ood");
  const Checkpoint ckpt = load_checkpoint(c.checkpoint);
  const data::ImageDataset id = load_dataset(c.detect_id, c.limit, data::Split::kTest);
  const data::ImageDataset ood = load_dataset(c.detect_ood, c.limit, data::Split::kTest);
  const Detection d = detect(ckpt.model, id, ood, c);

  write_file_atomic(c.out / "metrics.csv",
                    metrics_csv({{"auroc", d.auroc},
                                 {"auprc", d.auprc},
                                 {"mean_elbo_id", d.mean_id},
                                 {"mean_elbo_ood", d.mean_ood},
                                 {"count_id", static_cast<double>(id.size())},
                                 {"count_ood", static_cast<double>(ood.size())}}));
  std::ostringstream hist;
  eval::write_joint_histogram_csv(hist, eval::joint_histogram(d.scores, c.bins));
  write_file_atomic(c.out / "histogram.csv", hist.str());
  std::ostringstream scores;
  scores << "dataset,label,score\n";
  for (const auto& e : d.scores.entries) {
    scores << csv_field(e.dataset) << ',' << eval::to_string(e.label) << ','
           << format_number(e.score) << '\n';
  }
  write_file_atomic(c.out / "scores.csv", scores.str());
  log << "auroc " << format_number(d.auroc) << " auprc " << format_number(d.auprc) << '\n';
  return kExitOk;
}

int cmd_reconstruct(const RunConfig& c, std::ostream& log) {
  require(c.checkpoint, "checkpoint");
  require(c.reconstruct_dataset, "reconstruct.dataset");
  const Checkpoint ckpt = load_checkpoint(c.checkpoint);
  const data::ImageDataset dataset =
      load_dataset(c.reconstruct_dataset, c.limit, data::Split::kTest);
  if (c.reconstruct_count > dataset.size()) {
    throw ConfigError("reconstruct.count " + std::to_string(c.reconstruct_count) +
                      " exceeds dataset size " + std::to_string(dataset.size()));
  }
  const ReconstructionMetrics r = reconstruct_head(ckpt.model, dataset, c.reconstruct_count);
  write_file_atomic(c.out / "reconstruction.csv",
                    metrics_csv({{"mse", r.mse}, {"psnr", r.psnr}, {"ssim", r.ssim}}));
  const std::size_t side = data::kImageSide;
  for (std::size_t i = 0; i < c.reconstruct_count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%04zu", i);
    const auto recon = std::span<const float>(r.reconstructed)
                           .subspan(i * data::kImagePixels, data::kImagePixels);
    write_file_atomic(c.out / "images" / (std::string("original_") + name + ".pgm"),
                      encode_pgm(dataset.image(i), side, side));
    write_file_atomic(c.out / "images" / (std::string("reconstruction_") + name + ".pgm"),
                      encode_pgm(recon, side, side));
  }
  log << "mse " << format_number(r.mse) << " psnr " << format_number(r.psnr) << " ssim "
      << format_number(r.ssim) << '\n';
  return kExitOk;
}

int cmd_select_simple(const RunConfig& c, std::ostream& log) {
  require(c.basic, "data.basic");
  if (c.candidates.empty()) throw ConfigError("select.candidates: at least one candidate required");
  const data::ImageDataset basic = load_dataset(c.basic, c.limit, data::Split::kTrain);
  std::vector<data::ImageDataset> candidates;
  for (const auto& s : c.candidates) candidates.push_back(load_dataset(s, c.limit, data::Split::kTrain));

  eval::SelectionConfig sc;
  sc.architecture = c.architecture();
  sc.sigma = c.basic_sigma;
  sc.train = c.train_config();
  sc.statistic = c.statistic;
  const auto verdicts = eval::select_simple(basic, candidates, sc);

  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : "nan"; };
  std::ostringstream out;
  out << "candidate,statistic,self_elbo,basic_self_elbo,verdict\n";
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    const auto& v = verdicts[i];
    out << csv_field(c.candidates[i]) << ','
        << (c.statistic == eval::Statistic::kMedian ? "median" : "mean") << ','
        << opt(v.self_elbo) << ',' << opt(v.basic_self_elbo) << ',' << eval::to_string(v.verdict)
        << '\n';
    log << c.candidates[i] << ": " << eval::to_string(v.verdict) << '\n';
  }
  write_file_atomic(c.out / "verdicts.csv", out.str());
  return kExitOk;
}

int cmd_report(const RunConfig& c, std::ostream& log) {
  if (c.report_checkpoints.empty()) throw ConfigError("report.checkpoints: at least one required");
  require(c.detect_id, "detect.id");
  require(c.detect_ood, "detect.ood");
  const data::ImageDataset id = load_dataset(c.detect_id, c.limit, data::Split::kTest);
  const data::ImageDataset ood = load_dataset(c.detect_ood, c.limit, data::Split::kTest);
  std::ostringstream out;
  out << "checkpoint,mode,auroc,auprc,mean_elbo_id,mean_elbo_ood,lr_difference,lr_ratio,"
         "lr_flagged,mse_id,psnr_id,ssim_id,mse_ood,psnr_ood,ssim_ood\n";
  for (const auto& path : c.report_checkpoints) {
    const Checkpoint ckpt = load_checkpoint(path);
    const Detection d = detect(ckpt.model, id, ood, c);
    const auto lr = eval::likelihood_ratio_report(d.scores.scores(eval::Label::kId),
                                                  d.scores.scores(eval::Label::kOod));
    const auto rid = reconstruct_head(ckpt.model, id, id.size());
    const auto rood = reconstruct_head(ckpt.model, ood, ood.size());
    out << csv_field(path) << ',' << (ckpt.model.is_bpvae() ? "bpvae" : "vae") << ','
        << format_number(d.auroc) << ',' << format_number(d.auprc) << ','
        << format_number(d.mean_id) << ',' << format_number(d.mean_ood) << ','
        << format_number(lr.difference) << ',' << format_number(lr.ratio) << ','
        << (lr.flagged ? 1 : 0) << ',' << format_number(rid.mse) << ','
        << format_number(rid.psnr) << ',' << format_number(rid.ssim) << ','
        << format_number(rood.mse) << ',' << format_number(rood.psnr) << ','
        << format_number(rood.ssim) << '\n';
    log << path << ": auroc " << format_number(d.auroc) << '\n';
  }
  write_file_atomic(c.out / "report.csv", out.str());
  return kExitOk;
}

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '"' || ch == '\\') {
      out += '\\';
      out += ch;
    } else if (ch == '\n' || ch == '\r') {
      out += ' ';
    } else {
      out += ch;
    }
  }
  return out;
}

int fail(std::ostream& err, const char* kind, const std::string& message, int code) {
  err << "error: kind=" << kind << " message=\"" << escape(message) << "\"\n";
  return code;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  using Handler = int (*)(const RunConfig&, std::ostream&);
  const std::vector<std::tuple<std::string, std::string, Handler>> verbs = {
      {"train", "train a VAE or BPVAE and write a checkpoint", cmd_train},
      {"detect", "score id and ood datasets with a checkpoint", cmd_detect},
      {"reconstruct", "reconstruct images and report MSE/PSNR/SSIM", cmd_reconstruct},
      {"select-simple", "decide which candidates are simple relative to a basic dataset",
       cmd_select_simple},
      {"report", "compare checkpoints on an id/ood pair", cmd_report},
  };

  CLI::App app{"Bigeminal-priors VAE training and out-of-distribution detection", "bpvae"};
  app.require_subcommand(1);
  std::string config_path;
  std::map<std::string, std::string> flags;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help, handler] : verbs) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "config file of key = value lines");
    for (const auto& key : config_keys()) {
      sub->add_option("--" + key.name, flags[key.name],
                      key.help + (key.default_value.empty() ? "" : " [" + key.default_value + "]"));
    }
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    return fail(err, "usage", e.what(), kExitConfig);
  }

  try {
    for (const auto& [name, help, handler] : verbs) {
      CLI::App* sub = subs[name];
      if (!sub->parsed()) continue;
      ConfigValues values;
      if (!config_path.empty()) values = read_config_file(config_path);
      for (const auto& key : config_keys()) {
        if (sub->count("--" + key.name) > 0) values[key.name] = flags[key.name];
      }
      return handler(resolve_config(values), out);
    }
    return fail(err, "usage", "no command given", kExitConfig);
  } catch (const ConfigError& e) {
    return fail(err, "config", e.what(), kExitConfig);
  } catch (const DataError& e) {
    return fail(err, "data", e.what(), kExitData);
  } catch (const DivergenceError& e) {
    return fail(err, "divergence", "epoch " + std::to_string(e.epoch()) + ": " + e.what(),
                kExitDivergence);
  } catch (const ShapeError& e) {
    return fail(err, "data", e.what(), kExitData);
  } catch (const std::exception& e) {
    return fail(err, "internal", e.what(), 1);
  }
}

}  // namespace bpvae::cli
