#include <doctest.h>

#include <cmath>
#include <random>

#include "shipsr/errors.hpp"
#include "shipsr/metrics.hpp"
#include "support.hpp"

using namespace shipsr;

namespace {

// Per-channel means and the mean of squared red values.
class MomentEmbedder final : public ImageEmbedder {
 public:
  std::string id() const override { return "moments"; }
  Eigen::MatrixXd embed(const std::vector<Image>& images) override {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(images.size()), 4);
    for (std::size_t i = 0; i < images.size(); ++i) {
      double m[3] = {0, 0, 0}, sq = 0;
      const auto& im = images[i];
      const double n = static_cast<double>(im.height) * im.width;
      for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) {
          for (int c = 0; c < 3; ++c) m[c] += im.at(y, x, c);
          sq += im.at(y, x, 0) * im.at(y, x, 0);
        }
      const auto r = static_cast<Eigen::Index>(i);
      out(r, 0) = m[0] / n;
      out(r, 1) = m[1] / n;
      out(r, 2) = m[2] / n;
      out(r, 3) = sq / n;
    }
    return out;
  }
};

class ConstantPredictor final : public CategoryPredictor {
 public:
  explicit ConstantPredictor(int label) : label_(label) {}
  std::vector<int> predict(const std::vector<Image>& images) override {
    return std::vector<int>(images.size(), label_);
  }

 private:
  int label_;
};

class RandomPredictor final : public CategoryPredictor {
 public:
  std::vector<int> predict(const std::vector<Image>& images) override {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> d(0, 3);
    std::vector<int> out;
    for (std::size_t i = 0; i < images.size(); ++i) out.push_back(d(rng));
    return out;
  }
};

Eigen::MatrixXd draw_diag_gaussian(const Eigen::VectorXd& mean, const Eigen::VectorXd& sd, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(n, mean.size());
  for (int i = 0; i < n; ++i)
    for (Eigen::Index d = 0; d < mean.size(); ++d) x(i, d) = mean(d) + sd(d) * g(rng);
  return x;
}

// Closed form for diagonal covariances.
double diag_frechet(const Eigen::VectorXd& m1, const Eigen::VectorXd& v1, const Eigen::VectorXd& m2,
                    const Eigen::VectorXd& v2) {
  double d = 0;
  for (Eigen::Index i = 0; i < m1.size(); ++i) {
    const double s = std::sqrt(v1(i)) - std::sqrt(v2(i));
    d += (m1(i) - m2(i)) * (m1(i) - m2(i)) + s * s;
  }
  return d;
}

std::vector<Image> random_set(int n, int side, std::uint64_t seed) {
  std::vector<Image> out;
  for (int i = 0; i < n; ++i) out.push_back(testing::random_image(side, side, seed + i));
  return out;
}

}  // namespace

TEST_SUITE("metrics_eval") {
  TEST_CASE("psnr") {
    const auto a = Image::constant(16, 16, 0.5f);
    const auto b = Image::constant(16, 16, 0.5f + 16.0f / 255.0f);
    const double diff = static_cast<double>(0.5f + 16.0f / 255.0f) - 0.5;
    CHECK(psnr(a, b) == doctest::Approx(-10.0 * std::log10(diff * diff)).epsilon(1e-9));
    CHECK(std::abs(psnr(a, b) - 20.0 * std::log10(255.0 / 16.0)) < 1e-3);
    CHECK(psnr(a, a) == kPsnrCap);
    CHECK(psnr(Image::constant(4, 4, 0.0f), Image::constant(4, 4, 1.0f)) == doctest::Approx(0.0));
    const auto x = testing::random_image(12, 12, 1);
    const auto y = testing::random_image(12, 12, 2);
    CHECK(psnr(x, y) == psnr(y, x));
    CHECK_THROWS_AS(psnr(x, Image::constant(12, 11, 0.0f)), DimensionError);
  }

  TEST_CASE("ssim") {
    const auto x = testing::random_image(24, 24, 3);
    const auto y = testing::random_image(24, 24, 4);
    CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-9));
    const SsimOptions opt;
    const double expected = opt.c1 / (1.0 + opt.c1);
    CHECK(std::abs(ssim(Image::constant(16, 16, 0.0f), Image::constant(16, 16, 1.0f)) - expected) < 1e-6);
    CHECK(std::abs(expected - 9.999e-5) < 1e-6);
    CHECK(ssim(x, y) == doctest::Approx(ssim(y, x)).epsilon(1e-12));
    CHECK(ssim(x, y) < 0.5);
    CHECK_THROWS_AS(ssim(Image::constant(8, 8, 0.0f), Image::constant(8, 8, 0.0f)), DimensionError);
    CHECK_THROWS_AS(ssim(x, Image::constant(24, 20, 0.0f)), DimensionError);
  }

  TEST_CASE("frechet distance closed forms") {
    GaussianStats g1{Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3)};
    CHECK(frechet_distance(g1, g1) == doctest::Approx(0.0));
    GaussianStats g2 = g1;
    g2.mean(0) = 2.0;
    CHECK(std::abs(frechet_distance(g1, g2) - 4.0) < 1e-8);
    GaussianStats g3{Eigen::VectorXd::Zero(3), 4.0 * Eigen::MatrixXd::Identity(3, 3)};
    CHECK(std::abs(frechet_distance(g1, g3) - 3.0) < 1e-8);

    Eigen::MatrixXd a(2, 2);
    a << 2.0, 0.5, 0.5, 1.0;
    GaussianStats ga{Eigen::VectorXd::Zero(2), a};
    CHECK(std::abs(frechet_distance(ga, ga)) < 1e-10);

    GaussianStats bad = g1;
    bad.cov(0, 0) = -1.0;
    CHECK_THROWS_AS(frechet_distance(bad, g1), NumericError);
    GaussianStats small{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)};
    CHECK_THROWS_AS(frechet_distance(small, g1), DimensionError);
  }

  TEST_CASE("gaussian fit") {
    Eigen::MatrixXd x(3, 2);
    x << 1, 2, 3, 4, 5, 9;
    const auto g = fit_gaussian(x);
    CHECK(g.mean(0) == doctest::Approx(3.0));
    CHECK(g.mean(1) == doctest::Approx(5.0));
    CHECK(g.cov(0, 0) == doctest::Approx(4.0));
    CHECK(g.cov(1, 1) == doctest::Approx(13.0));
    CHECK(g.cov(0, 1) == doctest::Approx(7.0));
    CHECK_THROWS_AS(fit_gaussian(Eigen::MatrixXd(1, 2)), DataError);
  }

  TEST_CASE("sampled estimate approaches the closed form") {
    const int d = 8;
    Eigen::VectorXd m1 = Eigen::VectorXd::Zero(d), m2 = Eigen::VectorXd::Constant(d, 0.5);
    Eigen::VectorXd v1 = Eigen::VectorXd::Ones(d), v2 = Eigen::VectorXd::Constant(d, 2.25);
    const double exact = diag_frechet(m1, v1, m2, v2);
    CHECK(exact == doctest::Approx(4.0));
    const auto est = frechet_distance(fit_gaussian(draw_diag_gaussian(m1, v1.cwiseSqrt(), 10000, 1)),
                                      fit_gaussian(draw_diag_gaussian(m2, v2.cwiseSqrt(), 10000, 2)));
    CHECK(std::abs(est - exact) / exact < 0.10);

    // Same distribution: bias shrinks as N grows.
    double prev = 1e9;
    for (int n : {100, 1000, 10000}) {
      const auto same = frechet_distance(fit_gaussian(draw_diag_gaussian(m1, v1, n, 3)),
                                         fit_gaussian(draw_diag_gaussian(m1, v1, n, 4)));
      CHECK(same >= -1e-9);
      CHECK(same < prev);
      prev = same;
    }
  }

  TEST_CASE("fid with a stub embedder") {
    MomentEmbedder emb;
    const auto a = random_set(12, 8, 100);
    CHECK(std::abs(fid(a, a, emb)) < 1e-6);
    std::vector<Image> brighter;
    for (auto im : a) {
      for (auto& p : im.pixels) p = std::min(1.0f, p + 0.3f);
      brighter.push_back(im);
    }
    CHECK(fid(a, brighter, emb) > 0.1);
    CHECK_THROWS_AS(fid(random_set(4, 8, 1), a, emb), DataError);
  }

  TEST_CASE("downstream evaluation") {
    const auto set = random_set(1000, 2, 7);
    ConstantPredictor two(2);
    CHECK(downstream_eval(set, std::vector<int>(1000, 2), two) == 1.0);
    RandomPredictor rnd;
    std::vector<int> labels(1000);
    for (int i = 0; i < 1000; ++i) labels[i] = i % 4;
    CHECK(std::abs(downstream_eval(set, labels, rnd) - 0.25) < 0.05);
    ConstantPredictor zero(0);
    CHECK_THROWS_AS(downstream_eval({}, {}, zero), DataError);
    CHECK_THROWS_AS(downstream_eval(set, std::vector<int>(3, 0), zero), DataError);
  }

  TEST_CASE("comparison report") {
    MomentEmbedder emb;
    ConstantPredictor zero(0);
    const auto gt = random_set(12, 16, 200);
    std::vector<int> labels(12, 0);
    labels[0] = 1;
    auto noisy = gt;
    for (auto& im : noisy)
      for (auto& p : im.pixels) p = std::clamp(p + 0.05f, 0.0f, 1.0f);
    const auto result = comparison_report({{"model", noisy}}, gt, labels, zero, emb, 4, "abc");
    REQUIRE(result.report.methods.size() == 1);
    const auto& m = result.report.methods.at("model");
    double p = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) p += psnr(noisy[i], gt[i]);
    CHECK(m.psnr == doctest::Approx(p / 12.0));
    CHECK(m.accuracy == doctest::Approx(11.0 / 12.0));
    CHECK(result.report.embedder_id == "moments");
    CHECK(result.report.config_fingerprint == "abc");
    CHECK(result.grid.height == 4 * 16 + 5 * 2);
    CHECK(result.grid.width == 2 * 16 + 3 * 2);

    CHECK(report_from_json(report_to_json(result.report)) == result.report);
    CHECK_THROWS_AS(report_from_json(nlohmann::json{{"methods", 1}}), DataError);

    auto short_set = noisy;
    short_set.pop_back();
    CHECK_THROWS_AS(comparison_report({{"model", short_set}}, gt, labels, zero, emb), DataError);
    CHECK_THROWS_AS(comparison_report({}, gt, labels, zero, emb), DataError);
  }
}
