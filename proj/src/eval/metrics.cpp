#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "bpvae/eval.hpp"

namespace bpvae::eval {
namespace {

void require_both_labels(const ScoreSet& scores, const char* what) {
  scores.validate();
  if (scores.count(Label::kId) == 0 || scores.count(Label::kOod) == 0) {
    throw std::invalid_argument(std::string(what) + ": needs at least one id and one ood score");
  }
}

void require_same_size(std::span<const float> a, std::span<const float> b, const char* what) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument(std::string(what) + ": inputs must be nonempty and equal length (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
}

}  // namespace

double auroc(const ScoreSet& scores) {
  require_both_labels(scores, "auroc");
  const auto& e = scores.entries;
  std::vector<std::size_t> order(e.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return e[a].score < e[b].score; });
  double id_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && e[order[j]].score == e[order[i]].score) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (e[order[k]].label == Label::kId) id_rank_sum += midrank;
    }
    i = j;
  }
  const double n_id = static_cast<double>(scores.count(Label::kId));
  const double n_ood = static_cast<double>(scores.count(Label::kOod));
  return (id_rank_sum - n_id * (n_id + 1.0) / 2.0) / (n_id * n_ood);
}

double auprc(const ScoreSet& scores) {
  require_both_labels(scores, "auprc");
  std::vector<ScoreEntry> sorted = scores.entries;
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoreEntry& a, const ScoreEntry& b) { return a.score > b.score; });
  const double n_id = static_cast<double>(scores.count(Label::kId));
  double tp = 0.0, fp = 0.0, prev_recall = 0.0, ap = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) {
      (sorted[j].label == Label::kId ? tp : fp) += 1.0;
      ++j;
    }
    const double recall = tp / n_id;
    ap += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
    i = j;
  }
  return ap;
}

double mse(std::span<const float> reference, std::span<const float> test) {
  require_same_size(reference, test, "mse");
  double total = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = static_cast<double>(reference[i]) - test[i];
    total += d * d;
  }
  return total / static_cast<double>(reference.size());
}

double psnr_from_mse(double mse_value) {
  if (mse_value < 0.0 || !std::isfinite(mse_value)) {
    throw std::invalid_argument("psnr: mse must be finite and non-negative");
  }
  if (mse_value == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse_value);
}

double psnr(std::span<const float> reference, std::span<const float> test) {
  return psnr_from_mse(mse(reference, test));
}

double ssim(std::span<const float> reference, std::span<const float> test, std::size_t height,
            std::size_t width) {
  require_same_size(reference, test, "ssim");
  const std::size_t pixels = height * width;
  if (height < kSsimWindow || width < kSsimWindow || reference.size() % pixels != 0) {
    throw std::invalid_argument("ssim: images must be at least 8x8 and the input a whole number "
                                "of " + std::to_string(height) + "x" + std::to_string(width) +
                                " images");
  }
  const std::size_t images = reference.size() / pixels;
  const std::size_t stride = width + 1;
  // Summed-area tables of x, y, x^2, y^2, xy.
  std::vector<double> sx(stride * (height + 1)), sy(sx.size()), sxx(sx.size()), syy(sx.size()),
      sxy(sx.size());
  const double n = static_cast<double>(kSsimWindow * kSsimWindow);
  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t img = 0; img < images; ++img) {
    const float* x = reference.data() + img * pixels;
    const float* y = test.data() + img * pixels;
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        const double a = x[r * width + c], b = y[r * width + c];
        const std::size_t at = (r + 1) * stride + (c + 1);
        const std::size_t up = r * stride + (c + 1);
        const std::size_t left = (r + 1) * stride + c;
        const std::size_t diag = r * stride + c;
        sx[at] = a + sx[up] + sx[left] - sx[diag];
        sy[at] = b + sy[up] + sy[left] - sy[diag];
        sxx[at] = a * a + sxx[up] + sxx[left] - sxx[diag];
        syy[at] = b * b + syy[up] + syy[left] - syy[diag];
        sxy[at] = a * b + sxy[up] + sxy[left] - sxy[diag];
      }
    }
    auto box = [&](const std::vector<double>& t, std::size_t r, std::size_t c) {
      const std::size_t r1 = r + kSsimWindow, c1 = c + kSsimWindow;
      return t[r1 * stride + c1] - t[r * stride + c1] - t[r1 * stride + c] + t[r * stride + c];
    };
    for (std::size_t r = 0; r + kSsimWindow <= height; ++r) {
      for (std::size_t c = 0; c + kSsimWindow <= width; ++c) {
        const double mx = box(sx, r, c) / n, my = box(sy, r, c) / n;
        const double vx = box(sxx, r, c) / n - mx * mx;
        const double vy = box(syy, r, c) / n - my * my;
        const double cxy = box(sxy, r, c) / n - mx * my;
        total += ((2.0 * mx * my + kSsimC1) * (2.0 * cxy + kSsimC2)) /
                 ((mx * mx + my * my + kSsimC1) * (vx + vy + kSsimC2));
        ++windows;
      }
    }
  }
  return total / static_cast<double>(windows);
}

std::vector<HistogramBin> histogram(std::span<const double> scores, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("histogram: bin count must be positive");
  if (scores.empty()) throw std::invalid_argument("histogram: no scores");
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    throw std::invalid_argument("histogram: non-finite score");
  }
  std::vector<HistogramBin> out(bins);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].left = lo + width * static_cast<double>(b);
    out[b].right = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
  }
  for (double s : scores) {
    std::size_t b = width > 0.0 ? static_cast<std::size_t>((s - lo) / width) : 0;
    if (b >= bins) b = bins - 1;
    ++out[b].count;
  }
  return out;
}

std::vector<DatasetHistogram> joint_histogram(const ScoreSet& scores, std::size_t bins) {
  scores.validate();
  const std::vector<double> all = scores.scores();
  const std::vector<HistogramBin> frame = histogram(all, bins);
  const double lo = frame.front().left, hi = frame.back().right;
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<DatasetHistogram> out;
  std::map<std::string, std::size_t> index;
  for (const auto& e : scores.entries) {
    auto [it, inserted] = index.emplace(e.dataset, out.size());
    if (inserted) {
      DatasetHistogram h{e.dataset, frame};
      for (auto& bin : h.bins) bin.count = 0;
      out.push_back(std::move(h));
    }
    std::size_t b = width > 0.0 ? static_cast<std::size_t>((e.score - lo) / width) : 0;
    if (b >= bins) b = bins - 1;
    ++out[it->second].bins[b].count;
  }
  return out;
}

std::string format_number(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void write_metrics_csv(std::ostream& out,
                       std::span<const std::pair<std::string, double>> metrics) {
  out << "metric,value\n";
  for (const auto& [name, value] : metrics) out << name << ',' << format_number(value) << '\n';
}

void write_histogram_csv(std::ostream& out, std::span<const HistogramBin> bins) {
  out << "bin_left,bin_right,count\n";
  for (const auto& b : bins) {
    out << format_number(b.left) << ',' << format_number(b.right) << ',' << b.count << '\n';
  }
}

void write_joint_histogram_csv(std::ostream& out, std::span<const DatasetHistogram> histograms) {
  out << "dataset,bin_left,bin_right,count\n";
  for (const auto& h : histograms) {
    for (const auto& b : h.bins) {
      out << h.dataset << ',' << format_number(b.left) << ',' << format_number(b.right) << ','
          << b.count << '\n';
    }
  }
}

}  // namespace bpvae::eval
