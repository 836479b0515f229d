#pragma once

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "shipsr/classifier.hpp"
#include "shipsr/image.hpp"

namespace shipsr {

inline constexpr double kPsnrCap = 100.0;

// 10 log10(1 / MSE) over all channels; identical images report kPsnrCap.
double psnr(const Image& a, const Image& b);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double c1 = 1e-4;  // (0.01)^2
  double c2 = 9e-4;  // (0.03)^2
};

// Mean SSIM over all valid Gaussian-window positions of the luma channel
// (Y = 0.299 R + 0.587 G + 0.114 B).
double ssim(const Image& a, const Image& b, const SsimOptions& options = {});

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  Eigen::Index dim() const { return mean.size(); }
};

// Rows are samples. Two-pass mean/covariance with the N-1 denominator.
GaussianStats fit_gaussian(const Eigen::MatrixXd& samples);

// |mu1 - mu2|^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}), with the trace term computed
// as Tr((sqrt(S1) S2 sqrt(S1))^{1/2}) from symmetric eigendecompositions.
// Eigenvalues in [-1e-8, 0) are clipped to zero; anything lower is a NumericError.
double frechet_distance(const GaussianStats& g1, const GaussianStats& g2);

class ImageEmbedder {
 public:
  virtual ~ImageEmbedder() = default;
  virtual std::string id() const = 0;
  virtual Eigen::MatrixXd embed(const std::vector<Image>& images) = 0;
};

// Penultimate features of the ship classifier.
class ClassifierEmbedder final : public ImageEmbedder {
 public:
  ClassifierEmbedder(ShipClassifier model, std::string id) : model_(std::move(model)), id_(std::move(id)) {}
  std::string id() const override { return id_; }
  Eigen::MatrixXd embed(const std::vector<Image>& images) override;

 private:
  ShipClassifier model_;
  std::string id_;
};

// Both sets need at least D+1 images for a usable covariance.
double fid(const std::vector<Image>& images_a, const std::vector<Image>& images_b, ImageEmbedder& embedder);

class CategoryPredictor {
 public:
  virtual ~CategoryPredictor() = default;
  virtual std::vector<int> predict(const std::vector<Image>& images) = 0;
};

class ClassifierPredictor final : public CategoryPredictor {
 public:
  explicit ClassifierPredictor(ShipClassifier model) : model_(std::move(model)) {}
  std::vector<int> predict(const std::vector<Image>& images) override;

 private:
  ShipClassifier model_;
};

double downstream_eval(const std::vector<Image>& images, const std::vector<int>& labels, CategoryPredictor& model);

struct MethodMetrics {
  double psnr = 0.0;
  double ssim = 0.0;
  double fid = 0.0;
  double accuracy = 0.0;

  bool operator==(const MethodMetrics&) const = default;
};

struct MetricsReport {
  std::string config_fingerprint;
  std::string embedder_id;
  std::map<std::string, MethodMetrics> methods;

  bool operator==(const MetricsReport&) const = default;
};

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

struct ComparisonResult {
  MetricsReport report;
  Image grid;  // one row per sample: one column per method, then ground truth
};

// Every method's images must align index-by-index with gt and labels.
ComparisonResult comparison_report(const std::map<std::string, std::vector<Image>>& methods,
                                   const std::vector<Image>& gt, const std::vector<int>& labels,
                                   CategoryPredictor& predictor, ImageEmbedder& embedder, int grid_rows = 4,
                                   const std::string& config_fingerprint = "");

}  // namespace shipsr
