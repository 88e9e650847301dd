#include <memory>
#include <string>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "isorec/condition.hpp"
#include "isorec/denoiser.hpp"
#include "isorec/error.hpp"
#include "isorec/io.hpp"
#include "isorec/metrics.hpp"
#include "isorec/random.hpp"
#include "isorec/sampler.hpp"
#include "isorec/schedule.hpp"
#include "isorec/synth.hpp"

#ifndef ISOREC_VERSION
#define ISOREC_VERSION "0.0.0+unknown"
#endif

namespace py = pybind11;
using namespace isorec;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image2D to_image(const Array& a) {
    if (a.ndim() != 2) throw InvalidArgument("expected a 2-D array, got " + std::to_string(a.ndim()) + "-D");
    const auto h = static_cast<std::size_t>(a.shape(0));
    const auto w = static_cast<std::size_t>(a.shape(1));
    return Image2D(h, w, std::vector<double>(a.data(), a.data() + h * w));
}

Volume3D to_volume(const Array& a) {
    if (a.ndim() != 3) throw InvalidArgument("expected a 3-D array, got " + std::to_string(a.ndim()) + "-D");
    const auto d = static_cast<std::size_t>(a.shape(0));
    const auto h = static_cast<std::size_t>(a.shape(1));
    const auto w = static_cast<std::size_t>(a.shape(2));
    return Volume3D(d, h, w, std::vector<double>(a.data(), a.data() + d * h * w));
}

Array from_image(const Image2D& img) {
    Array out({img.height(), img.width()});
    std::copy(img.data().begin(), img.data().end(), out.mutable_data());
    return out;
}

Array from_volume(const Volume3D& vol) {
    Array out({vol.depth(), vol.height(), vol.width()});
    std::copy(vol.data().begin(), vol.data().end(), out.mutable_data());
    return out;
}

struct Model {
    std::shared_ptr<const Denoiser> impl;
};

SamplerConfig sampler_config(const NoiseSchedule& schedule, int steps, int refine, const std::string& sigma,
                             int sscs_period, bool final_clamp, bool clip_x0, std::uint64_t seed) {
    SamplerConfig cfg;
    cfg.plan = uniform_subsequence(schedule.steps(), steps, refine);
    cfg.sigma_mode = SigmaMode::parse(sigma);
    cfg.sscs_period = sscs_period;
    cfg.final_clamp = final_clamp;
    cfg.clip_x0 = clip_x0;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_isorec, m) {
    m.doc() = "isorec core bindings";
    m.attr("__version__") = ISOREC_VERSION;

    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<IncompatibleCheckpoint>(m, "IncompatibleCheckpoint", PyExc_ValueError);
    py::register_exception<TrainingFailure>(m, "TrainingFailure", PyExc_ArithmeticError);
    py::register_exception<SamplingFailure>(m, "SamplingFailure", PyExc_ArithmeticError);

    py::class_<NoiseSchedule>(m, "NoiseSchedule")
        .def_property_readonly("steps", &NoiseSchedule::steps)
        .def_property_readonly("family", &NoiseSchedule::family)
        .def("beta", &NoiseSchedule::beta, py::arg("t"))
        .def("alpha_bar", &NoiseSchedule::alpha_bar, py::arg("t"))
        .def("posterior_variance", &NoiseSchedule::posterior_variance, py::arg("t"));

    m.def("linear_schedule", &linear_schedule, py::arg("train_steps") = 1000, py::arg("beta_start") = 1e-4,
          py::arg("beta_end") = 0.02);

    m.def(
        "q_sample",
        [](const Array& x0, int t, const NoiseSchedule& schedule, std::uint64_t seed) {
            const Image2D img = to_image(x0);
            RandomSource rng(seed);
            return from_image(q_sample(img, t, gaussian_noise(rng, img.height(), img.width()), schedule));
        },
        py::arg("x0"), py::arg("t"), py::arg("schedule"), py::arg("seed") = 0,
        "Draw x_t from the forward marginal using the given seed.");

    m.def(
        "pad_axial",
        [](const Array& x_axi, int alpha) {
            const ConditionPair p = pad_axial(to_image(x_axi), alpha);
            return py::make_tuple(from_image(p.x_con_0), from_image(p.mask));
        },
        py::arg("x_axi"), py::arg("alpha"), "Returns (condition, mask) on the isotropic grid.");
    m.def(
        "unpad_axial",
        [](const Array& condition, const Array& mask, int alpha) {
            return from_image(unpad_axial(ConditionPair{to_image(condition), to_image(mask), alpha}));
        },
        py::arg("condition"), py::arg("mask"), py::arg("alpha"));
    m.def(
        "downsample_axial", [](const Array& vol, int alpha) { return from_volume(downsample_axial(to_volume(vol), alpha)); },
        py::arg("volume"), py::arg("alpha"));
    m.def(
        "replicate_rows", [](const Array& img, int alpha) { return from_image(replicate_rows(to_image(img), alpha)); },
        py::arg("image"), py::arg("alpha"));

    m.def(
        "psnr", [](const Array& x, const Array& y, double max_value) { return psnr(to_image(x), to_image(y), max_value); },
        py::arg("x"), py::arg("y"), py::arg("max_value") = 255.0);
    m.def(
        "ssim", [](const Array& x, const Array& y, double max_value) { return ssim(to_image(x), to_image(y), max_value); },
        py::arg("x"), py::arg("y"), py::arg("max_value") = 255.0);

    m.def(
        "synthesize",
        [](const std::string& kind, std::array<std::size_t, 3> dims, std::uint64_t seed, double period,
           double sharpness, double rho) {
            SynthOptions o;
            o.kind = parse_synth_kind(kind);
            o.dims = dims;
            o.seed = seed;
            o.period = period;
            o.sharpness = sharpness;
            o.rho = rho;
            return from_volume(synthesize(o));
        },
        py::arg("kind") = "striped", py::arg("dims") = std::array<std::size_t, 3>{32, 32, 32}, py::arg("seed") = 0,
        py::arg("period") = 8.0, py::arg("sharpness") = 3.0, py::arg("rho") = 0.9);

    m.def(
        "read_volume", [](const std::filesystem::path& p) { return from_volume(read_volume(p)); }, py::arg("path"));
    m.def(
        "write_volume",
        [](const std::filesystem::path& p, const Array& vol, bool u8) {
            write_volume(p, to_volume(vol), u8 ? VolumeDtype::uint8 : VolumeDtype::float32);
        },
        py::arg("path"), py::arg("volume"), py::arg("u8") = false);

    py::class_<Model>(m, "Model")
        .def_property_readonly("kind", [](const Model& model) { return model.impl->kind(); })
        .def(
            "predict_noise",
            [](const Model& model, const Array& x_t, int t, const NoiseSchedule& schedule) {
                return from_image(model.impl->predict_noise(to_image(x_t), t, schedule));
            },
            py::arg("x_t"), py::arg("t"), py::arg("schedule"));

    m.def(
        "load_model", [](const std::filesystem::path& p) { return Model{load_denoiser(p)}; }, py::arg("path"));
    m.def(
        "gaussian_model",
        [](std::size_t height, std::size_t width, double rho) {
            return Model{make_analytic_gaussian_denoiser(ar1_column_spec(height, width, rho))};
        },
        py::arg("height"), py::arg("width"), py::arg("rho"),
        "Exact denoiser for images whose columns are AR(1) sequences along the rows.");

    m.def(
        "reconstruct_slice",
        [](const Array& x_axi, int alpha, const Model& model, int steps, int refine, const std::string& sigma,
           int sscs_period, bool final_clamp, bool clip_x0, std::uint64_t seed) {
            const NoiseSchedule schedule = linear_schedule();
            const SamplerConfig cfg =
                sampler_config(schedule, steps, refine, sigma, sscs_period, final_clamp, clip_x0, seed);
            const Image2D in = to_image(x_axi);
            Image2D out;
            {
                py::gil_scoped_release release;
                out = reconstruct_slice(in, alpha, *model.impl, schedule, cfg);
            }
            return from_image(out);
        },
        py::arg("x_axi"), py::arg("alpha"), py::arg("model"), py::arg("steps") = 25, py::arg("refine") = 40,
        py::arg("sigma") = "posterior", py::arg("sscs_period") = 1, py::arg("final_clamp") = true,
        py::arg("clip_x0") = true, py::arg("seed") = 0);

    m.def(
        "reconstruct_volume",
        [](const Array& vol, int alpha, const Model& model, int steps, int refine, const std::string& sigma,
           int sscs_period, bool final_clamp, bool clip_x0, std::uint64_t seed, const std::string& axis,
           int threads) {
            const NoiseSchedule schedule = linear_schedule();
            const SamplerConfig cfg =
                sampler_config(schedule, steps, refine, sigma, sscs_period, final_clamp, clip_x0, seed);
            VolumeOptions options;
            options.axes = parse_axis_set(axis);
            options.threads = threads;
            const Volume3D in = to_volume(vol);
            VolumeReconstruction rec;
            {
                py::gil_scoped_release release;
                rec = reconstruct_volume(in, alpha, *model.impl, schedule, cfg, options);
            }
            return py::make_tuple(from_volume(rec.volume), py::module_::import("json").attr("loads")(report_json(rec.report)));
        },
        py::arg("volume"), py::arg("alpha"), py::arg("model"), py::arg("steps") = 25, py::arg("refine") = 40,
        py::arg("sigma") = "posterior", py::arg("sscs_period") = 1, py::arg("final_clamp") = true,
        py::arg("clip_x0") = true, py::arg("seed") = 0, py::arg("axis") = "xz", py::arg("threads") = 1,
        "Returns (volume, report dict).");
}
