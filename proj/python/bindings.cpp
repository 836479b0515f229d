#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "shipsr/cli.hpp"
#include "shipsr/degradation.hpp"
#include "shipsr/diffusion.hpp"
#include "shipsr/errors.hpp"
#include "shipsr/metrics.hpp"
#include "shipsr/png_io.hpp"
#include "shipsr/run_config.hpp"
#include "shipsr/text.hpp"

namespace py = pybind11;
using namespace shipsr;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Image to_image(const FloatArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw DimensionError("expected an H x W x 3 array");
  Image im(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), im.pixels.begin());
  return im;
}

FloatArray to_array(const Image& im) {
  FloatArray out({im.height, im.width, Image::kChannels});
  std::copy(im.pixels.begin(), im.pixels.end(), out.mutable_data());
  return out;
}

ScheduleKind parse_kind(const std::string& s) {
  if (s == "linear") return ScheduleKind::Linear;
  if (s == "cosine") return ScheduleKind::Cosine;
  throw ArgumentError("unknown schedule kind '" + s + "'");
}

}  // namespace

PYBIND11_MODULE(_shipsr, m) {
  m.doc() = "Native core of the ship super-resolution toolkit";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<ArgumentError>(m, "ArgumentError", base.ptr());
  py::register_exception<IndexError>(m, "IndexError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<ConfigurationError>(m, "ConfigurationError", base.ptr());
  py::register_exception<DependencyError>(m, "DependencyError", base.ptr());

  m.def("read_png", [](const std::string& path) { return to_array(read_png(path)); }, py::arg("path"));
  m.def("write_png", [](const std::string& path, const FloatArray& a) { write_png(path, to_image(a)); },
        py::arg("path"), py::arg("image"));

  m.def("psnr", [](const FloatArray& a, const FloatArray& b) { return psnr(to_image(a), to_image(b)); });
  m.def("ssim", [](const FloatArray& a, const FloatArray& b) { return ssim(to_image(a), to_image(b)); });
  m.def(
      "frechet_distance",
      [](const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1, const Eigen::VectorXd& mu2,
         const Eigen::MatrixXd& cov2) { return frechet_distance({mu1, cov1}, {mu2, cov2}); },
      py::arg("mu1"), py::arg("cov1"), py::arg("mu2"), py::arg("cov2"));
  m.def(
      "fit_gaussian",
      [](const Eigen::MatrixXd& samples) {
        auto g = fit_gaussian(samples);
        return py::make_tuple(g.mean, g.cov);
      },
      py::arg("samples"));

  m.def(
      "alpha_bars",
      [](const std::string& kind, std::int64_t timesteps, double beta_start, double beta_end) {
        return make_schedule(parse_kind(kind), timesteps, beta_start, beta_end).alpha_bars;
      },
      py::arg("kind") = "linear", py::arg("timesteps") = 200, py::arg("beta_start") = 1e-4,
      py::arg("beta_end") = 0.02);

  m.def("center_crop", [](const FloatArray& a, int side) { return to_array(center_crop(to_image(a), side)); });
  m.def("bicubic_upsample",
        [](const FloatArray& a, int factor) { return to_array(bicubic_upsample(to_image(a), factor)); });
  m.def(
      "degrade",
      [](const FloatArray& a, int factor, double kernel_sigma, int kernel_size, double noise_sigma,
         std::uint64_t seed) {
        DegradationConfig cfg;
        cfg.kernel = kernel_sigma > 0.0 ? gaussian_kernel(kernel_sigma, kernel_size) : identity_kernel();
        cfg.downscale_factor = factor;
        cfg.noise_sigma = noise_sigma;
        cfg.seed = seed;
        return to_array(apply_degradation(to_image(a), cfg));
      },
      py::arg("image"), py::arg("factor") = 8, py::arg("kernel_sigma") = 0.0, py::arg("kernel_size") = 21,
      py::arg("noise_sigma") = 0.0, py::arg("seed") = 0);

  m.def(
      "render_prompt",
      [](int template_id, const std::string& name, const std::string& category) {
        return render_prompt(PromptSet::defaults(), template_id, name, category);
      },
      py::arg("template_id"), py::arg("name"), py::arg("category"));

  m.def("default_config", [] { return to_json(RunConfig{}).dump(); });
  m.def(
      "fingerprint",
      [](const std::string& config_json) { return fingerprint(run_config_from_json(nlohmann::json::parse(config_json))); },
      py::arg("config_json"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
