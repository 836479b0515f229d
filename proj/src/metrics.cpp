#include "shipsr/metrics.hpp"

#include <cmath>

#include "shipsr/errors.hpp"
#include "shipsr/tensor_image.hpp"

namespace shipsr {
namespace {

void require_same_dims(const Image& a, const Image& b) {
  if (a.height != b.height || a.width != b.width || a.size() != b.size()) {
    throw DimensionError("images differ in size: " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                         " vs " + std::to_string(b.height) + "x" + std::to_string(b.width));
  }
}

std::vector<double> luma(const Image& im) {
  std::vector<double> y(static_cast<std::size_t>(im.height) * im.width);
  for (int r = 0; r < im.height; ++r) {
    for (int c = 0; c < im.width; ++c) {
      y[static_cast<std::size_t>(r) * im.width + c] =
          0.299 * im.at(r, c, 0) + 0.587 * im.at(r, c, 1) + 0.114 * im.at(r, c, 2);
    }
  }
  return y;
}

// Separable "valid" filtering of a single-channel plane.
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int oh = h - n + 1;
  const int ow = w - n + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) throw NumericError(std::string("eigendecomposition failed for ") + what);
  Eigen::VectorXd values = eig.eigenvalues();
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) < -1e-8) {
      throw NumericError(std::string(what) + " is not positive semi-definite (eigenvalue " +
                         std::to_string(values(i)) + ")");
    }
    values(i) = std::sqrt(std::max(values(i), 0.0));
  }
  return eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
}

void check_stats(const GaussianStats& g, const char* what) {
  if (g.cov.rows() != g.dim() || g.cov.cols() != g.dim()) {
    throw DimensionError(std::string(what) + " covariance does not match the mean dimension");
  }
  if ((g.cov - g.cov.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
    throw NumericError(std::string(what) + " covariance is not symmetric");
  }
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  require_same_dims(a, b);
  if (a.empty()) throw DimensionError("psnr of empty images");
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& a, const Image& b, const SsimOptions& o) {
  require_same_dims(a, b);
  if (a.height < o.window || a.width < o.window) {
    throw DimensionError("image smaller than the SSIM window");
  }
  std::vector<double> k(static_cast<std::size_t>(o.window));
  double ks = 0.0;
  for (int i = 0; i < o.window; ++i) {
    const double d = i - (o.window - 1) / 2.0;
    k[i] = std::exp(-d * d / (2.0 * o.sigma * o.sigma));
    ks += k[i];
  }
  for (double& v : k) v /= ks;

  const auto ya = luma(a);
  const auto yb = luma(b);
  std::vector<double> aa(ya.size()), bb(ya.size()), ab(ya.size());
  for (std::size_t i = 0; i < ya.size(); ++i) {
    aa[i] = ya[i] * ya[i];
    bb[i] = yb[i] * yb[i];
    ab[i] = ya[i] * yb[i];
  }
  const int h = a.height, w = a.width;
  const auto mu_a = filter_valid(ya, h, w, k);
  const auto mu_b = filter_valid(yb, h, w, k);
  const auto e_aa = filter_valid(aa, h, w, k);
  const auto e_bb = filter_valid(bb, h, w, k);
  const auto e_ab = filter_valid(ab, h, w, k);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double va = e_aa[i] - mu_a[i] * mu_a[i];
    const double vb = e_bb[i] - mu_b[i] * mu_b[i];
    const double cab = e_ab[i] - mu_a[i] * mu_b[i];
    total += ((2.0 * mu_a[i] * mu_b[i] + o.c1) * (2.0 * cab + o.c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + o.c1) * (va + vb + o.c2));
  }
  return total / static_cast<double>(mu_a.size());
}

GaussianStats fit_gaussian(const Eigen::MatrixXd& samples) {
  if (samples.rows() < 2) throw DataError("need at least two samples for a covariance");
  GaussianStats g;
  g.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centred = samples.rowwise() - g.mean.transpose();
  g.cov = (centred.transpose() * centred) / static_cast<double>(samples.rows() - 1);
  g.cov = 0.5 * (g.cov + g.cov.transpose());
  return g;
}

double frechet_distance(const GaussianStats& g1, const GaussianStats& g2) {
  if (g1.dim() != g2.dim()) throw DimensionError("Gaussian statistics differ in dimension");
  check_stats(g1, "first");
  check_stats(g2, "second");
  const Eigen::MatrixXd root1 = symmetric_sqrt(g1.cov, "first covariance");
  Eigen::MatrixXd inner = root1 * g2.cov * root1;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inner, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition of the covariance product failed");
  double trace_root = 0.0;
  // The product inherits rounding from both factors; scale the clip tolerance with it.
  const double tol = 1e-8 * std::max(1.0, inner.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    const double v = eig.eigenvalues()(i);
    if (v < -tol) throw NumericError("covariance product has a negative eigenvalue");
    trace_root += std::sqrt(std::max(v, 0.0));
  }
  const double mean_term = (g1.mean - g2.mean).squaredNorm();
  return mean_term + g1.cov.trace() + g2.cov.trace() - 2.0 * trace_root;
}

Eigen::MatrixXd ClassifierEmbedder::embed(const std::vector<Image>& images) {
  torch::NoGradGuard no_grad;
  model_->eval();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(images.size()), model_->config.embed_dim);
  for (std::size_t i = 0; i < images.size(); i += 64) {
    std::vector<const Image*> chunk;
    for (std::size_t j = i; j < std::min(images.size(), i + 64); ++j) chunk.push_back(&images[j]);
    auto f = model_->features(to_batch(chunk)).to(torch::kFloat64).contiguous();
    auto acc = f.accessor<double, 2>();
    for (std::int64_t r = 0; r < f.size(0); ++r) {
      for (std::int64_t c = 0; c < f.size(1); ++c) out(static_cast<Eigen::Index>(i) + r, c) = acc[r][c];
    }
  }
  return out;
}

double fid(const std::vector<Image>& images_a, const std::vector<Image>& images_b, ImageEmbedder& embedder) {
  const Eigen::MatrixXd fa = embedder.embed(images_a);
  const Eigen::MatrixXd fb = embedder.embed(images_b);
  const auto need = static_cast<std::size_t>(std::max(fa.cols(), fb.cols()) + 1);
  if (images_a.size() < need || images_b.size() < need) {
    throw DataError("FID needs at least " + std::to_string(need) + " images per set");
  }
  return frechet_distance(fit_gaussian(fa), fit_gaussian(fb));
}

std::vector<int> ClassifierPredictor::predict(const std::vector<Image>& images) {
  return predict_labels(images, model_);
}

double downstream_eval(const std::vector<Image>& images, const std::vector<int>& labels, CategoryPredictor& model) {
  if (images.empty()) throw DataError("downstream evaluation of an empty set");
  if (images.size() != labels.size()) throw DataError("labels do not align with images");
  const auto pred = model.predict(images);
  if (pred.size() != labels.size()) throw DataError("predictor returned the wrong number of labels");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += pred[i] == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

nlohmann::json report_to_json(const MetricsReport& report) {
  nlohmann::json methods = nlohmann::json::object();
  for (const auto& [name, m] : report.methods) {
    methods[name] = {{"psnr", m.psnr}, {"ssim", m.ssim}, {"fid", m.fid}, {"accuracy", m.accuracy}};
  }
  return {{"config_fingerprint", report.config_fingerprint},
          {"embedder_id", report.embedder_id},
          {"methods", methods}};
}

MetricsReport report_from_json(const nlohmann::json& j) {
  try {
    MetricsReport r;
    r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    r.embedder_id = j.at("embedder_id").get<std::string>();
    for (const auto& [name, m] : j.at("methods").items()) {
      r.methods[name] = {m.at("psnr").get<double>(), m.at("ssim").get<double>(), m.at("fid").get<double>(),
                         m.at("accuracy").get<double>()};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

ComparisonResult comparison_report(const std::map<std::string, std::vector<Image>>& methods,
                                   const std::vector<Image>& gt, const std::vector<int>& labels,
                                   CategoryPredictor& predictor, ImageEmbedder& embedder, int grid_rows,
                                   const std::string& config_fingerprint) {
  if (methods.empty()) throw DataError("comparison needs at least one method");
  if (gt.empty() || labels.size() != gt.size()) throw DataError("labels do not align with the ground truth");
  for (const auto& [name, images] : methods) {
    if (images.size() != gt.size()) throw DataError("method '" + name + "' is not aligned with the ground truth");
  }
  ComparisonResult result;
  result.report.config_fingerprint = config_fingerprint;
  result.report.embedder_id = embedder.id();
  for (const auto& [name, images] : methods) {
    MethodMetrics m;
    double p = 0.0, s = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      p += psnr(images[i], gt[i]);
      s += ssim(images[i], gt[i]);
    }
    m.psnr = p / static_cast<double>(gt.size());
    m.ssim = s / static_cast<double>(gt.size());
    m.fid = fid(images, gt, embedder);
    m.accuracy = downstream_eval(images, labels, predictor);
    result.report.methods[name] = m;
  }
  std::vector<std::vector<Image>> rows;
  const auto n_rows = std::min<std::size_t>(static_cast<std::size_t>(std::max(grid_rows, 1)), gt.size());
  for (std::size_t r = 0; r < n_rows; ++r) {
    std::vector<Image> row;
    for (const auto& [name, images] : methods) row.push_back(images[r]);
    row.push_back(gt[r]);
    rows.push_back(std::move(row));
  }
  result.grid = tile_grid(rows);
  return result;
}

}  // namespace shipsr
