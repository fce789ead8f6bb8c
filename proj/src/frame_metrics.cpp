#include "storyreel/frame_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "storyreel/brisque_kernels.hpp"
#include "storyreel/errors.hpp"
#include "storyreel/fs_util.hpp"

namespace storyreel {

namespace fs = std::filesystem;

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw Error(Errc::ContractViolation,
                "embedding dimensions differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) throw Error(Errc::DegenerateEmbedding, "zero embedding vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double consistency(const std::vector<EmbeddingVector>& frames) {
  if (frames.size() < 2)
    throw Error(Errc::InsufficientFrames, "consistency needs at least 2 frames, got " + std::to_string(frames.size()));
  double sum = 0;
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) sum += cosine(frames[i].values, frames[i + 1].values);
  return sum / static_cast<double>(frames.size() - 1);
}

double alignment(const std::vector<std::pair<EmbeddingVector, EmbeddingVector>>& pairs) {
  if (pairs.empty()) throw Error(Errc::InsufficientFrames, "alignment needs at least 1 pair");
  double sum = 0;
  for (const auto& [t, v] : pairs) sum += cosine(t.values, v.values);
  return sum / static_cast<double>(pairs.size());
}

GrayImage mscn(const GrayImage& image, KernelImpl impl) {
  if (image.width < 16 || image.height < 16)
    throw Error(Errc::ImageTooSmall, "MSCN needs at least 16x16, got " + std::to_string(image.width) + "x" +
                                         std::to_string(image.height));
  return impl == KernelImpl::serial ? brisque::serial::mscn(image, kMscnC, kVarianceFloor)
                                    : brisque::omp::mscn(image, kMscnC, kVarianceFloor);
}

double ggd_rho(double alpha) {
  return std::exp(2 * std::lgamma(2 / alpha) - std::lgamma(1 / alpha) - std::lgamma(3 / alpha));
}

namespace {

struct RhoTable {
  std::vector<double> alpha;
  std::vector<double> rho;
};

const RhoTable& rho_table() {
  static const RhoTable table = [] {
    RhoTable t;
    for (int k = 200; k <= 10000; ++k) {
      double a = k / 1000.0;
      t.alpha.push_back(a);
      t.rho.push_back(ggd_rho(a));
    }
    return t;
  }();
  return table;
}

struct Moments {
  double abs_mean = 0;
  double sq_mean = 0;
};

Moments moments(std::span<const double> x) {
  double s1 = 0, s2 = 0;
  for (double v : x) {
    s1 += std::abs(v);
    s2 += v * v;
  }
  const double n = static_cast<double>(x.size());
  return {s1 / n, s2 / n};
}

void require_samples(std::span<const double> samples) {
  if (samples.size() < 100)
    throw Error(Errc::DegenerateDistribution, "need at least 100 samples, got " + std::to_string(samples.size()));
  for (double v : samples)
    if (!std::isfinite(v)) throw Error(Errc::DegenerateDistribution, "non-finite sample");
}

}  // namespace

double invert_ggd_rho(double rho) {
  const auto& t = rho_table();
  if (!(rho > t.rho.front())) return t.alpha.front();
  if (rho >= t.rho.back()) return t.alpha.back();
  auto it = std::upper_bound(t.rho.begin(), t.rho.end(), rho);
  std::size_t hi = static_cast<std::size_t>(it - t.rho.begin());
  std::size_t lo = hi - 1;
  double f = (rho - t.rho[lo]) / (t.rho[hi] - t.rho[lo]);
  return t.alpha[lo] + f * (t.alpha[hi] - t.alpha[lo]);
}

GgdFit fit_ggd(std::span<const double> samples, std::optional<double> variance_floor) {
  require_samples(samples);
  Moments m = moments(samples);
  double var = m.sq_mean;
  if (variance_floor) {
    var = std::max(var, *variance_floor);
  } else if (var == 0) {
    throw Error(Errc::DegenerateDistribution, "zero variance");
  }
  return {invert_ggd_rho(m.abs_mean * m.abs_mean / var), var};
}

AggdFit fit_aggd(std::span<const double> samples, std::optional<double> variance_floor) {
  require_samples(samples);
  double left_sq = 0, right_sq = 0;
  std::size_t n_left = 0, n_right = 0;
  for (double v : samples) {
    if (v < 0) {
      left_sq += v * v;
      ++n_left;
    } else if (v > 0) {
      right_sq += v * v;
      ++n_right;
    }
  }
  double lvar, rvar;
  if (variance_floor) {
    lvar = n_left ? std::max(left_sq / static_cast<double>(n_left), *variance_floor) : *variance_floor;
    rvar = n_right ? std::max(right_sq / static_cast<double>(n_right), *variance_floor) : *variance_floor;
  } else {
    if (!n_left || !n_right)
      throw Error(Errc::DegenerateDistribution, std::string("no samples on the ") + (n_left ? "right" : "left") + " side");
    lvar = left_sq / static_cast<double>(n_left);
    rvar = right_sq / static_cast<double>(n_right);
  }
  const double sl = std::sqrt(lvar);
  const double sr = std::sqrt(rvar);
  const double gamma = sl / sr;

  Moments m = moments(samples);
  double sq = m.sq_mean;
  if (variance_floor) sq = std::max(sq, *variance_floor);
  const double r_hat = m.abs_mean * m.abs_mean / sq;
  const double g2 = gamma * gamma;
  const double R_hat = r_hat * (gamma * g2 + 1) * (gamma + 1) / ((g2 + 1) * (g2 + 1));
  const double alpha = invert_ggd_rho(R_hat);

  const double lg1 = std::lgamma(1 / alpha), lg2 = std::lgamma(2 / alpha), lg3 = std::lgamma(3 / alpha);
  const double mean = (sr - sl) * std::exp(lg2 - lg1) * std::sqrt(std::exp(lg1 - lg3));
  return {alpha, mean, lvar, rvar};
}

std::vector<double> brisque_features(const GrayImage& image, KernelImpl impl) {
  if (image.width < 32 || image.height < 32)
    throw Error(Errc::ImageTooSmall, "BRISQUE needs at least 32x32, got " + std::to_string(image.width) + "x" +
                                         std::to_string(image.height));
  std::vector<double> features;
  features.reserve(kBrisqueDims);
  GrayImage scale = image;
  for (int s = 0; s < 2; ++s) {
    if (s == 1)
      scale = impl == KernelImpl::serial ? brisque::serial::downsample2(scale) : brisque::omp::downsample2(scale);
    GrayImage m = mscn(scale, impl);
    GgdFit g = fit_ggd(m.data, kVarianceFloor);
    features.push_back(g.alpha);
    features.push_back(g.variance);
    for (const auto& [dy, dx] : brisque::kShifts) {
      auto prod = impl == KernelImpl::serial ? brisque::serial::pair_product(m, dy, dx)
                                             : brisque::omp::pair_product(m, dy, dx);
      AggdFit a = fit_aggd(prod, kVarianceFloor);
      features.push_back(a.alpha);
      features.push_back(a.mean);
      features.push_back(a.left_variance);
      features.push_back(a.right_variance);
    }
  }
  return features;
}

namespace {

std::vector<std::vector<double>> numeric_lines(const std::string& text, const std::string& what,
                                               std::vector<std::pair<std::string, double>>* headers) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (headers && (first == "gamma" || first == "bias")) {
      double v;
      if (!(ls >> v)) throw Error(Errc::ParseFailed, what + " line " + std::to_string(lineno) + ": missing value");
      headers->emplace_back(first, v);
      continue;
    }
    std::vector<double> row;
    std::istringstream all(line);
    std::string tok;
    while (all >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(Errc::ParseFailed, what + " line " + std::to_string(lineno) + ": bad number '" + tok + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

SvrModel SvrModel::parse(const std::string& model_text, const std::string& ranges_text) {
  SvrModel model;
  for (const auto& row : numeric_lines(ranges_text, "ranges", nullptr)) {
    if (row.size() != 2) throw Error(Errc::ParseFailed, "ranges lines need '<min> <max>'");
    if (!(row[0] < row[1]))
      throw Error(Errc::ContractViolation, "range min must be below max (feature " +
                                               std::to_string(model.ranges.size()) + ")");
    model.ranges.emplace_back(row[0], row[1]);
  }
  if (static_cast<int>(model.ranges.size()) != kBrisqueDims)
    throw Error(Errc::ContractViolation,
                "ranges file has " + std::to_string(model.ranges.size()) + " features, expected 36");

  std::vector<std::pair<std::string, double>> headers;
  auto rows = numeric_lines(model_text, "model", &headers);
  bool have_gamma = false, have_bias = false;
  for (const auto& [k, v] : headers) {
    if (k == "gamma") {
      model.gamma = v;
      have_gamma = true;
    } else {
      model.bias = v;
      have_bias = true;
    }
  }
  if (!have_gamma || !have_bias) throw Error(Errc::ParseFailed, "model file needs 'gamma' and 'bias' lines");
  for (auto& row : rows) {
    if (row.size() != static_cast<std::size_t>(kBrisqueDims) + 1)
      throw Error(Errc::ContractViolation, "support vector with " + std::to_string(row.size() - 1) +
                                               " dimensions, expected 36");
    model.coefficients.push_back(row.back());
    row.pop_back();
    model.support_vectors.push_back(std::move(row));
  }
  return model;
}

SvrModel SvrModel::load(const fs::path& model_file, const fs::path& ranges_file) {
  for (const auto& p : {model_file, ranges_file})
    if (!fs::exists(p)) throw Error(Errc::Config, "SVR file not found: " + p.string());
  return parse(read_file(model_file), read_file(ranges_file));
}

std::vector<double> normalize_features(const std::vector<double>& features, const SvrModel& model) {
  if (features.size() != model.dims())
    throw Error(Errc::ContractViolation, "feature vector has " + std::to_string(features.size()) +
                                             " values, model expects " + std::to_string(model.dims()));
  std::vector<double> out(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (!std::isfinite(features[i])) throw Error(Errc::ContractViolation, "non-finite feature " + std::to_string(i));
    const auto [lo, hi] = model.ranges[i];
    out[i] = -1.0 + 2.0 * (features[i] - lo) / (hi - lo);
  }
  return out;
}

double brisque_score_raw(const std::vector<double>& features, const SvrModel& model) {
  const auto x = normalize_features(features, model);
  double score = model.bias;
  for (std::size_t k = 0; k < model.support_vectors.size(); ++k) {
    const auto& sv = model.support_vectors[k];
    double d2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - sv[i]) * (x[i] - sv[i]);
    score += model.coefficients[k] * std::exp(-model.gamma * d2);
  }
  return score;
}

double brisque_score(const std::vector<double>& features, const SvrModel& model) {
  return std::clamp(brisque_score_raw(features, model), 0.0, 100.0);
}

json MetricReport::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{{"movie_id", movie_id},         {"frames", frames},           {"consistency", opt(consistency)},
              {"alignment", opt(alignment)}, {"brisque_mean", opt(brisque_mean)}, {"brisque", brisque}};
}

std::map<std::string, std::string> load_captions(const fs::path& file) {
  json j = read_json(file);
  std::map<std::string, std::string> out;
  if (j.is_array()) {
    for (const auto& r : j) {
      if (!r.is_object() || !r.contains("image_path") || !r.contains("source_text"))
        throw Error(Errc::ParseFailed, "caption records need image_path and source_text");
      out[fs::path(r["image_path"].get<std::string>()).filename().string()] = r["source_text"].get<std::string>();
    }
  } else if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      if (!v.is_string()) throw Error(Errc::ParseFailed, "caption for " + k + " is not a string");
      out[k] = v.get<std::string>();
    }
  } else {
    throw Error(Errc::ParseFailed, "captions file must hold a list or an object");
  }
  return out;
}

std::vector<fs::path> list_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::Config, "frames directory not found: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

MetricReport compute_metrics(const std::string& movie_id, const std::vector<fs::path>& frames,
                             const std::map<std::string, std::string>& captions, EmbeddingClient& embedder,
                             const SvrModel* model) {
  MetricReport report;
  report.movie_id = movie_id;
  std::vector<EmbeddingVector> image_emb;
  std::vector<std::pair<EmbeddingVector, EmbeddingVector>> pairs;
  for (const auto& path : frames) {
    std::string bytes = read_file(path);
    const std::string name = path.filename().string();
    report.frames.push_back(name);
    EmbeddingVector v = embedder.embed({Modality::image, bytes});
    image_emb.push_back(v);
    auto cap = captions.find(name);
    if (cap != captions.end()) pairs.emplace_back(embedder.embed({Modality::text, cap->second}), v);
    if (model) report.brisque.push_back(brisque_score(brisque_features(to_gray(decode_png(bytes))), *model));
  }
  if (image_emb.size() >= 2) report.consistency = consistency(image_emb);
  if (!pairs.empty()) report.alignment = alignment(pairs);
  if (!report.brisque.empty()) {
    double s = 0;
    for (double b : report.brisque) s += b;
    report.brisque_mean = s / static_cast<double>(report.brisque.size());
  }
  return report;
}

}  // namespace storyreel
