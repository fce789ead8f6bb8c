#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "storyreel/backend.hpp"
#include "storyreel/gateway.hpp"
#include "storyreel/image.hpp"
#include "storyreel/plot_model.hpp"

namespace storyreel {

// ---- embedding metrics ----

// Throws ContractViolation on a dimension mismatch, DegenerateEmbedding on a
// zero vector.
double cosine(const std::vector<double>& a, const std::vector<double>& b);

// Mean cosine of adjacent frame embeddings. InsufficientFrames below 2.
double consistency(const std::vector<EmbeddingVector>& frames);

// Mean cosine of (text, image) pairs. InsufficientFrames when empty.
double alignment(const std::vector<std::pair<EmbeddingVector, EmbeddingVector>>& pairs);

// ---- BRISQUE ----

inline constexpr double kMscnC = 1.0;
inline constexpr double kVarianceFloor = 1e-6;
inline constexpr int kBrisqueDims = 36;

enum class KernelImpl { serial, omp };

// ImageTooSmall below 16x16.
GrayImage mscn(const GrayImage& image, KernelImpl impl = KernelImpl::omp);

// rho(a) = Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a)).
double ggd_rho(double alpha);
// Inverse of ggd_rho by table lookup over a in [0.2, 10] (step 0.001) with
// linear interpolation; clamps outside the table.
double invert_ggd_rho(double rho);

struct GgdFit {
  double alpha = 0;
  double variance = 0;
};

struct AggdFit {
  double alpha = 0;
  double mean = 0;
  double left_variance = 0;
  double right_variance = 0;
};

// Moment matching. Without a floor, a zero second moment (or an empty side
// for the AGGD) is DegenerateDistribution; with one, variances are raised to
// it and empty sides take it. Fewer than 100 samples is DegenerateDistribution.
GgdFit fit_ggd(std::span<const double> samples, std::optional<double> variance_floor = std::nullopt);
AggdFit fit_aggd(std::span<const double> samples, std::optional<double> variance_floor = std::nullopt);

// 36 values: per scale (full, 2x2 box downsampled) the MSCN GGD (shape,
// variance), then for H, V, D1, D2 products the AGGD (shape, mean, left
// variance, right variance). ImageTooSmall below 32x32.
std::vector<double> brisque_features(const GrayImage& image, KernelImpl impl = KernelImpl::omp);

struct SvrModel {
  double gamma = 0;
  double bias = 0;
  std::vector<std::vector<double>> support_vectors;  // in normalized feature space
  std::vector<double> coefficients;
  std::vector<std::pair<double, double>> ranges;  // per feature (min, max)

  std::size_t dims() const { return ranges.size(); }

  static SvrModel parse(const std::string& model_text, const std::string& ranges_text);
  static SvrModel load(const std::filesystem::path& model_file, const std::filesystem::path& ranges_file);
};

// Features mapped to [-1, 1] with the model ranges.
std::vector<double> normalize_features(const std::vector<double>& features, const SvrModel& model);

// RBF expansion plus bias, before clamping.
double brisque_score_raw(const std::vector<double>& features, const SvrModel& model);

// brisque_score_raw clamped to [0, 100]. ContractViolation on a dimension
// mismatch or non-finite features.
double brisque_score(const std::vector<double>& features, const SvrModel& model);

// ---- per-movie report ----

struct MetricReport {
  std::string movie_id;
  std::vector<std::string> frames;
  std::optional<double> consistency;
  std::optional<double> alignment;
  std::optional<double> brisque_mean;
  std::vector<double> brisque;

  json to_json() const;
};

// Frame file name -> caption. Accepts a frames.json record list (image_path,
// source_text) or a flat {"<file>": "<caption>"} object.
std::map<std::string, std::string> load_captions(const std::filesystem::path& file);

// Every *.png in the directory, sorted by name.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

// Consistency needs >= 2 frames and alignment needs captions; otherwise they
// are left undefined. BRISQUE runs when a model is given.
MetricReport compute_metrics(const std::string& movie_id, const std::vector<std::filesystem::path>& frames,
                             const std::map<std::string, std::string>& captions, EmbeddingClient& embedder,
                             const SvrModel* model);

}  // namespace storyreel
