#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "isorec/condition.hpp"
#include "isorec/error.hpp"
#include "isorec/io.hpp"
#include "isorec/metrics.hpp"
#include "isorec/sampler.hpp"
#include "isorec/schedule.hpp"
#include "isorec/synth.hpp"
#include "isorec/training.hpp"

#ifndef ISOREC_VERSION
#define ISOREC_VERSION "0.0.0+unknown"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace isorec;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kFormat = 3, kNumeric = 4 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string out;
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::vector<std::string> argv;
};

std::uint64_t resolve_seed(const Common& common) {
    if (common.seed) return *common.seed;
    if (const char* env = std::getenv("ISOREC_SEED"); env != nullptr && *env != '\0') {
        std::size_t used = 0;
        try {
            const unsigned long long v = std::stoull(env, &used);
            if (used == std::strlen(env)) return v;
        } catch (const std::exception&) {
        }
        throw UsageError(std::string("ISOREC_SEED is not an unsigned integer: '") + env + "'");
    }
    return 0;
}

// .raw inputs are headerless uint8 with a "<path>.dims" sidecar; everything else is ISOV.
Volume3D load_volume(const std::string& path) {
    if (fs::path(path).extension() == ".raw") return import_raw_u8(path);
    return read_volume(path);
}

void require_file(const std::string& path, const char* what) {
    if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
}

fs::path prepare_out(const Common& common) {
    const fs::path out(common.out);
    fs::create_directories(out);
    return out;
}

void write_manifest(const fs::path& out, const std::string& command, const Common& common, json inputs,
                    json config, const std::vector<std::string>& outputs) {
    json m = {{"tool", "isorec"},
              {"version", ISOREC_VERSION},
              {"command", command},
              {"argv", common.argv},
              {"inputs", std::move(inputs)},
              {"config", std::move(config)},
              {"outputs", outputs}};
    write_file_atomic(out / "manifest.json", m.dump(2) + "\n");
}

std::string volume_dims(const Volume3D& v) {
    return std::to_string(v.depth()) + "x" + std::to_string(v.height()) + "x" + std::to_string(v.width());
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string kind = "striped";
    std::vector<std::size_t> dims{32, 32, 32};
    double period = 8.0;
    double sharpness = 3.0;
    int blobs = 24;
    double blob_radius = 3.0;
    double rho = 0.9;
    bool u8 = false;
};

int cmd_synth(const SynthArgs& a, const Common& common) {
    SynthOptions o;
    try {
        o.kind = parse_synth_kind(a.kind);
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    if (a.dims.size() != 3) throw UsageError("--dims takes three values: Z Y X");
    o.dims = {a.dims[0], a.dims[1], a.dims[2]};
    o.seed = resolve_seed(common);
    o.period = a.period;
    o.sharpness = a.sharpness;
    o.blob_count = a.blobs;
    o.blob_radius = a.blob_radius;
    o.rho = a.rho;
    const Volume3D vol = synthesize(o);

    std::optional<GaussianDataSpec> spec;
    if (o.kind == SynthKind::gaussian && o.dims[0] * o.dims[2] <= GaussianDataSpec::kMaxFullPixels) {
        spec = ar1_column_spec(o.dims[0], o.dims[2], o.rho);
    }

    const fs::path out = prepare_out(common);
    std::vector<std::string> outputs{"volume.isov"};
    write_volume(out / "volume.isov", vol, a.u8 ? VolumeDtype::uint8 : VolumeDtype::float32);
    if (spec) {
        store_checkpoint(out / "model.ckpt", AnalyticGaussianDenoiser(*spec));
        outputs.push_back("model.ckpt");
    }
    write_manifest(out, "synth", common, json::object(),
                   {{"kind", to_string(o.kind)},
                    {"dims", o.dims},
                    {"seed", o.seed},
                    {"period", o.period},
                    {"sharpness", o.sharpness},
                    {"blob_count", o.blob_count},
                    {"blob_radius", o.blob_radius},
                    {"rho", o.rho},
                    {"dtype", a.u8 ? "uint8" : "float32"}},
                   outputs);
    std::cout << "synth: " << to_string(o.kind) << " volume " << volume_dims(vol) << " -> " << (out / "volume.isov").string()
              << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------

struct DegradeArgs {
    std::string input;
    int alpha = 0;
};

int cmd_degrade(const DegradeArgs& a, const Common& common) {
    require_file(a.input, "input volume");
    if (a.alpha < 1) throw UsageError("--alpha must be >= 1");
    const Volume3D vol = load_volume(a.input);
    if (vol.depth() % static_cast<std::size_t>(a.alpha) != 0) {
        throw UsageError("volume depth " + std::to_string(vol.depth()) + " is not divisible by alpha " +
                         std::to_string(a.alpha) + "; crop the volume first");
    }
    const Volume3D lr = downsample_axial(vol, a.alpha);
    const fs::path out = prepare_out(common);
    write_volume(out / "degraded.isov", lr);
    write_manifest(out, "degrade", common, {{"input", a.input}}, {{"alpha", a.alpha}}, {"degraded.isov"});
    std::cout << "degrade: " << volume_dims(vol) << " -> " << volume_dims(lr) << " (alpha " << a.alpha << ")\n";
    return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::vector<std::string> inputs;
    long steps = 2000;
    int batch = 8;
    double lr = 3e-3;
    std::string optimizer = "adam";
    double momentum = 0.9;
    double clip_norm = 1.0;
    std::size_t crop = 0;
    bool no_augment = false;
    bool no_cosine = false;
    double ema = 0.0;
    int channels = 16;
    int blocks = 3;
    int embed_dim = 16;
};

int cmd_train(const TrainArgs& a, const Common& common) {
    TrainConfig cfg;
    cfg.steps = a.steps;
    cfg.batch_size = a.batch;
    cfg.learning_rate = a.lr;
    cfg.momentum = a.momentum;
    cfg.clip_norm = a.clip_norm;
    cfg.crop = a.crop;
    cfg.augment = !a.no_augment;
    cfg.cosine_decay = !a.no_cosine;
    cfg.ema_decay = a.ema;
    cfg.threads = common.threads;
    cfg.seed = resolve_seed(common);
    const TinyArch arch{a.channels, a.blocks, a.embed_dim};
    try {
        cfg.optimizer = parse_optimizer(a.optimizer);
        cfg.validate();
        arch.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    for (const auto& in : a.inputs) require_file(in, "training volume");

    std::vector<Image2D> dataset;
    for (const auto& in : a.inputs) {
        const Volume3D vol = load_volume(in);
        for (std::size_t z = 0; z < vol.depth(); ++z) dataset.push_back(extract_lateral_slice(vol, z));
    }
    for (const auto& img : dataset) {
        if (!img.same_shape(dataset.front())) throw UsageError("training volumes must share their lateral size");
    }
    if (cfg.crop > dataset.front().height() || cfg.crop > dataset.front().width()) {
        throw UsageError("--crop exceeds the lateral slice size");
    }

    const NoiseSchedule schedule = linear_schedule();
    RandomSource init(cfg.seed, 0x1417);
    const auto started = std::chrono::steady_clock::now();
    const TrainResult result = train_denoiser(TinyDenoiser::initialized(arch, init), dataset, schedule, cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    const fs::path out = prepare_out(common);
    store_checkpoint(out / "model.ckpt", result.model);
    std::ostringstream csv;
    csv << "step,loss\n";
    for (std::size_t i = 0; i < result.loss_trace.size(); ++i) csv << i << ',' << result.loss_trace[i] << '\n';
    write_file_atomic(out / "loss.csv", csv.str());
    write_manifest(out, "train", common, {{"volumes", a.inputs}},
                   {{"architecture", arch.describe()},
                    {"slices", dataset.size()},
                    {"steps", cfg.steps},
                    {"batch_size", cfg.batch_size},
                    {"optimizer", to_string(cfg.optimizer)},
                    {"learning_rate", cfg.learning_rate},
                    {"momentum", cfg.momentum},
                    {"clip_norm", cfg.clip_norm},
                    {"crop", cfg.crop},
                    {"augment", cfg.augment},
                    {"cosine_decay", cfg.cosine_decay},
                    {"ema_decay", cfg.ema_decay},
                    {"seed", cfg.seed},
                    {"initial_loss", window_mean(result.loss_trace, 100, false)},
                    {"final_loss", window_mean(result.loss_trace, 100, true)},
                    {"seconds", secs}},
                   {"model.ckpt", "loss.csv"});
    std::printf("train: %zu lateral slices, %ld steps, loss %.5f -> %.5f in %.1f s\n", dataset.size(), cfg.steps,
                window_mean(result.loss_trace, 100, false), window_mean(result.loss_trace, 100, true), secs);
    return kOk;
}

// ---------------------------------------------------------------------------

struct SamplerArgs {
    int alpha = 0;
    int steps = 25;
    int refine = 40;
    std::string sigma = "posterior";
    int sscs_period = 1;
    std::string axis = "xz";
    bool fuse = false;
    bool no_clamp = false;
    bool no_clip = false;
};

struct SamplerSetup {
    SamplerConfig cfg;
    VolumeOptions options;
};

SamplerSetup sampler_setup(const SamplerArgs& a, const Common& common, const NoiseSchedule& schedule) {
    if (a.alpha < 1) throw UsageError("--alpha is required and must be >= 1");
    SamplerSetup s;
    try {
        s.cfg.plan = uniform_subsequence(schedule.steps(), a.steps, a.refine);
        s.cfg.sigma_mode = SigmaMode::parse(a.sigma);
        s.options.axes = parse_axis_set(a.axis);
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    if (a.fuse) {
        if (a.axis == "xz" || a.axis == "both") {
            s.options.axes = AxisSet::both;
        } else {
            throw UsageError("--fuse combines xz and yz results; it cannot be used with --axis " + a.axis);
        }
    }
    s.cfg.sscs_period = a.sscs_period;
    s.cfg.final_clamp = !a.no_clamp;
    s.cfg.clip_x0 = !a.no_clip;
    s.cfg.seed = resolve_seed(common);
    s.options.threads = common.threads;
    try {
        s.cfg.validate(schedule);
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    if (common.threads < 1) throw UsageError("--threads must be >= 1");
    return s;
}

json sampler_json(const SamplerSetup& s, int alpha) {
    return {{"alpha", alpha},
            {"steps", s.cfg.plan.step_count()},
            {"refine", s.cfg.plan.refine},
            {"budget", s.cfg.plan.total_steps()},
            {"sigma", s.cfg.sigma_mode.to_string()},
            {"sscs_period", s.cfg.sscs_period},
            {"axes", to_string(s.options.axes)},
            {"final_clamp", s.cfg.final_clamp},
            {"clip_x0", s.cfg.clip_x0},
            {"seed", s.cfg.seed},
            {"threads", s.options.threads}};
}

struct ReconstructArgs {
    std::string input;
    std::string model;
    SamplerArgs sampler;
    bool pgm = false;
};

int cmd_reconstruct(const ReconstructArgs& a, const Common& common) {
    const NoiseSchedule schedule = linear_schedule();
    const SamplerSetup setup = sampler_setup(a.sampler, common, schedule);
    require_file(a.input, "input volume");
    require_file(a.model, "model checkpoint");
    const Volume3D lr = load_volume(a.input);
    const auto model = load_denoiser(a.model);

    std::cout << "reconstruct: budget T_total = " << setup.cfg.plan.step_count() << " x " << setup.cfg.plan.refine
              << " = " << setup.cfg.plan.total_steps() << " denoiser calls per slice\n";
    const VolumeReconstruction rec = reconstruct_volume(lr, a.sampler.alpha, *model, schedule, setup.cfg, setup.options);

    const fs::path out = prepare_out(common);
    std::vector<std::string> outputs{"recon.isov", "report.json"};
    write_volume(out / "recon.isov", rec.volume);
    write_file_atomic(out / "report.json", report_json(rec.report));
    if (a.pgm) {
        fs::create_directories(out / "pgm");
        for (std::size_t y = 0; y < rec.volume.height(); ++y) {
            char name[32];
            std::snprintf(name, sizeof name, "pgm/xz_%04zu.pgm", y);
            export_slice_pgm(extract_axial_slice(rec.volume, AxialPlane::xz, y), out / name);
        }
        outputs.push_back("pgm/");
    }
    write_manifest(out, "reconstruct", common, {{"volume", a.input}, {"model", a.model}},
                   sampler_json(setup, a.sampler.alpha), outputs);
    std::printf("reconstruct: %s -> %s, %zu planes, %ld denoiser calls, %.2f s\n", volume_dims(lr).c_str(),
                volume_dims(rec.volume).c_str(), rec.report.planes, rec.report.denoiser_calls, rec.report.seconds);
    return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string recon;
    std::string truth;
    std::string axis = "xz";
    double max_value = 255.0;
    std::string space = "8bit";
};

struct EvalSetup {
    std::vector<AxialPlane> planes;
    bool eight_bit = true;
};

EvalSetup eval_setup(const std::string& axis, const std::string& space, double max_value) {
    EvalSetup s;
    if (axis == "xz" || axis == "both") s.planes.push_back(AxialPlane::xz);
    if (axis == "yz" || axis == "both") s.planes.push_back(AxialPlane::yz);
    if (s.planes.empty()) throw UsageError("--axis must be xz, yz or both");
    if (space != "8bit" && space != "canonical") throw UsageError("--space must be 8bit or canonical");
    s.eight_bit = space == "8bit";
    if (!(max_value > 0.0)) throw UsageError("--max-value must be positive");
    return s;
}

MetricReport evaluate(const Volume3D& recon, const Volume3D& truth, const EvalSetup& setup, double max_value) {
    if (!recon.same_shape(truth)) {
        throw UsageError("reconstruction " + volume_dims(recon) + " and truth " + volume_dims(truth) +
                         " differ in shape");
    }
    MetricReport all;
    double ssim_sum = 0.0;
    for (AxialPlane plane : setup.planes) {
        MetricReport r = evaluate_volume(recon, truth, plane, max_value, setup.eight_bit);
        all.psnr_db = r.psnr_db;
        for (auto& s : r.slices) {
            ssim_sum += s.ssim;
            all.slices.push_back(std::move(s));
        }
    }
    all.ssim = ssim_sum / static_cast<double>(all.slices.size());
    return all;
}

double mean_slice_psnr(const MetricReport& r) {
    double acc = 0.0;
    for (const auto& s : r.slices) acc += s.psnr_db;
    return acc / static_cast<double>(r.slices.size());
}

int cmd_eval(const EvalArgs& a, const Common& common) {
    const EvalSetup setup = eval_setup(a.axis, a.space, a.max_value);
    require_file(a.recon, "reconstruction");
    require_file(a.truth, "ground truth");
    const Volume3D recon = load_volume(a.recon);
    const Volume3D truth = load_volume(a.truth);
    const MetricReport rep = evaluate(recon, truth, setup, a.max_value);

    const fs::path out = prepare_out(common);
    write_file_atomic(out / "metrics.csv", metrics_csv(rep));
    write_manifest(out, "eval", common, {{"recon", a.recon}, {"truth", a.truth}},
                   {{"axis", a.axis},
                    {"space", a.space},
                    {"max_value", a.max_value},
                    {"volume_psnr_db", rep.psnr_db},
                    {"mean_slice_psnr_db", mean_slice_psnr(rep)},
                    {"mean_ssim", rep.ssim}},
                   {"metrics.csv"});
    std::printf("eval: %zu slices, volume PSNR %.3f dB, mean slice PSNR %.3f dB, mean SSIM %.4f\n", rep.slices.size(),
                rep.psnr_db, mean_slice_psnr(rep), rep.ssim);
    return kOk;
}

// ---------------------------------------------------------------------------

struct AblateArgs {
    std::string truth;
    std::string model;
    SamplerArgs sampler;
    std::vector<std::string> grid{"25x40", "100x10", "250x4", "1000x1"};
    std::vector<int> periods{1};
    std::string space = "8bit";
    double max_value = 255.0;
};

std::pair<int, int> parse_cell(const std::string& text) {
    const auto x = text.find('x');
    try {
        if (x == std::string::npos) throw std::invalid_argument("missing 'x'");
        std::size_t used_t = 0, used_k = 0;
        const int t = std::stoi(text.substr(0, x), &used_t);
        const int k = std::stoi(text.substr(x + 1), &used_k);
        if (used_t != x || used_k != text.size() - x - 1 || t < 1 || k < 1) throw std::invalid_argument("range");
        return {t, k};
    } catch (const std::exception&) {
        throw UsageError("grid cell '" + text + "' must look like TxK with positive integers, e.g. 25x40");
    }
}

int cmd_ablate(const AblateArgs& a, const Common& common) {
    const NoiseSchedule schedule = linear_schedule();
    if (a.grid.empty() || a.periods.empty()) throw UsageError("the ablation grid is empty");
    std::vector<std::pair<int, int>> cells;
    for (const auto& g : a.grid) cells.push_back(parse_cell(g));
    std::vector<SamplerSetup> setups;
    for (const auto& [t, k] : cells) {
        for (int period : a.periods) {
            SamplerArgs s = a.sampler;
            s.steps = t;
            s.refine = k;
            s.sscs_period = period;
            setups.push_back(sampler_setup(s, common, schedule));
        }
    }
    const EvalSetup eval = eval_setup(a.sampler.axis == "yz" ? "yz" : "xz", a.space, a.max_value);
    require_file(a.truth, "ground truth");
    require_file(a.model, "model checkpoint");
    const Volume3D truth = load_volume(a.truth);
    if (truth.depth() % static_cast<std::size_t>(a.sampler.alpha) != 0) {
        throw UsageError("truth depth is not divisible by alpha " + std::to_string(a.sampler.alpha));
    }
    const auto model = load_denoiser(a.model);
    const Volume3D lr = downsample_axial(truth, a.sampler.alpha);

    std::ostringstream csv;
    csv << "T,K,sscs_period,budget,mean_psnr_db,mean_ssim,wall_seconds\n";
    for (std::size_t i = 0; i < setups.size(); ++i) {
        const auto& s = setups[i];
        const std::string cell = "cell " + std::to_string(i) + " (T=" + std::to_string(s.cfg.plan.step_count()) +
                                 ", K=" + std::to_string(s.cfg.plan.refine) +
                                 ", sscs_period=" + std::to_string(s.cfg.sscs_period) + ")";
        VolumeReconstruction rec;
        try {
            rec = reconstruct_volume(lr, a.sampler.alpha, *model, schedule, s.cfg, s.options);
        } catch (const SamplingFailure& e) {
            throw SamplingFailure(e.timestep(), e.refine(), cell + ": " + e.what());
        }
        const MetricReport rep = evaluate(rec.volume, truth, eval, a.max_value);
        char row[256];
        std::snprintf(row, sizeof row, "%d,%d,%d,%ld,%.6f,%.6f,%.3f\n", s.cfg.plan.step_count(), s.cfg.plan.refine,
                      s.cfg.sscs_period, s.cfg.plan.total_steps(), mean_slice_psnr(rep), rep.ssim, rec.report.seconds);
        csv << row;
        std::cout << "ablate: " << cell << " budget " << s.cfg.plan.total_steps() << ": " << row;
    }

    const fs::path out = prepare_out(common);
    write_file_atomic(out / "ablation.csv", csv.str());
    json grid = json::array();
    for (const auto& s : setups) grid.push_back(sampler_json(s, a.sampler.alpha));
    write_manifest(out, "ablate", common, {{"truth", a.truth}, {"model", a.model}},
                   {{"cells", grid}, {"space", a.space}, {"max_value", a.max_value}}, {"ablation.csv"});
    return kOk;
}

void add_sampler_flags(CLI::App* cmd, SamplerArgs& s, bool with_grid) {
    cmd->add_option("--alpha", s.alpha, "Axial anisotropy factor")->required()->check(CLI::PositiveNumber);
    if (!with_grid) {
        cmd->add_option("--steps", s.steps, "Plan steps T")->capture_default_str();
        cmd->add_option("--refine", s.refine, "Refine rounds K per step")->capture_default_str();
        cmd->add_option("--sscs-period", s.sscs_period, "Compose with the condition every n-th step")
            ->capture_default_str();
    }
    cmd->add_option("--sigma", s.sigma, "posterior | beta | ddim:ETA")->capture_default_str();
    cmd->add_option("--axis", s.axis, "xz | yz | both")->capture_default_str();
    cmd->add_flag("--fuse", s.fuse, "Average xz and yz reconstructions");
    cmd->add_flag("--no-clamp", s.no_clamp, "Do not overwrite known rows at the end");
    cmd->add_flag("--no-clip", s.no_clip, "Do not clip x0 estimates to [-1, 1]");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"isorec: diffusion-based isotropic reconstruction of anisotropic volumes"};
    app.set_version_flag("--version", ISOREC_VERSION);
    app.require_subcommand(1);

    Common common;
    for (int i = 0; i < argc; ++i) common.argv.emplace_back(argv[i]);
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--out", common.out, "Output directory")->required();
        cmd->add_option("--seed", common.seed, "Random seed (falls back to ISOREC_SEED, then 0)");
        cmd->add_option("--threads", common.threads, "Worker threads")->capture_default_str();
    };

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "Generate a synthetic isotropic volume");
    c_synth->add_option("--kind", synth.kind, "striped | blobs | gaussian")->capture_default_str();
    c_synth->add_option("--dims", synth.dims, "Z Y X")->expected(3);
    c_synth->add_option("--period", synth.period, "Stripe period in voxels")->capture_default_str();
    c_synth->add_option("--sharpness", synth.sharpness, "Stripe edge steepness (0 = sinusoid)")->capture_default_str();
    c_synth->add_option("--blobs", synth.blobs, "Blob count")->capture_default_str();
    c_synth->add_option("--blob-radius", synth.blob_radius, "Mean blob radius")->capture_default_str();
    c_synth->add_option("--rho", synth.rho, "AR(1) correlation along z")->capture_default_str();
    c_synth->add_flag("--u8", synth.u8, "Store as uint8 instead of float32");
    add_common(c_synth);

    DegradeArgs degrade;
    auto* c_degrade = app.add_subcommand("degrade", "Average-pool a volume along z");
    c_degrade->add_option("input", degrade.input, "Isotropic volume")->required();
    c_degrade->add_option("--alpha", degrade.alpha, "Pooling factor")->required();
    add_common(c_degrade);

    TrainArgs train;
    auto* c_train = app.add_subcommand("train", "Train the convolutional denoiser on lateral slices");
    c_train->add_option("inputs", train.inputs, "Volumes whose xy slices form the dataset")->required();
    c_train->add_option("--steps", train.steps, "Optimizer steps")->capture_default_str();
    c_train->add_option("--batch", train.batch, "Batch size")->capture_default_str();
    c_train->add_option("--lr", train.lr, "Learning rate")->capture_default_str();
    c_train->add_option("--optimizer", train.optimizer, "adam | sgd")->capture_default_str();
    c_train->add_option("--momentum", train.momentum, "SGD momentum / Adam beta1")->capture_default_str();
    c_train->add_option("--clip-norm", train.clip_norm, "Gradient norm cap (0 = off)")->capture_default_str();
    c_train->add_option("--crop", train.crop, "Square crop size (0 = whole slices)")->capture_default_str();
    c_train->add_flag("--no-augment", train.no_augment, "Disable flips and transposes");
    c_train->add_flag("--no-cosine", train.no_cosine, "Keep the learning rate constant");
    c_train->add_option("--ema", train.ema, "Weight EMA decay (0 = off)")->capture_default_str();
    c_train->add_option("--channels", train.channels, "Feature channels")->capture_default_str();
    c_train->add_option("--blocks", train.blocks, "Residual blocks")->capture_default_str();
    c_train->add_option("--embed-dim", train.embed_dim, "Timestep embedding size")->capture_default_str();
    add_common(c_train);

    ReconstructArgs recon;
    auto* c_recon = app.add_subcommand("reconstruct", "Reconstruct an isotropic volume from a degraded one");
    c_recon->add_option("input", recon.input, "Low axial resolution volume")->required();
    c_recon->add_option("--model", recon.model, "Denoiser checkpoint")->required();
    add_sampler_flags(c_recon, recon.sampler, false);
    c_recon->add_flag("--pgm", recon.pgm, "Also export every xz plane as PGM");
    add_common(c_recon);

    EvalArgs eval;
    auto* c_eval = app.add_subcommand("eval", "PSNR and SSIM of a reconstruction against ground truth");
    c_eval->add_option("recon", eval.recon, "Reconstructed volume")->required();
    c_eval->add_option("truth", eval.truth, "Ground-truth volume")->required();
    c_eval->add_option("--axis", eval.axis, "xz | yz | both")->capture_default_str();
    c_eval->add_option("--max-value", eval.max_value, "Peak value for PSNR/SSIM")->capture_default_str();
    c_eval->add_option("--space", eval.space, "8bit | canonical")->capture_default_str();
    add_common(c_eval);

    AblateArgs ablate;
    auto* c_ablate = app.add_subcommand("ablate", "Sweep (T, K) and SSCS period on a degraded ground truth");
    c_ablate->add_option("truth", ablate.truth, "Isotropic ground-truth volume")->required();
    c_ablate->add_option("--model", ablate.model, "Denoiser checkpoint")->required();
    add_sampler_flags(c_ablate, ablate.sampler, true);
    c_ablate->add_option("--grid", ablate.grid, "TxK cells")->capture_default_str()->delimiter(',');
    c_ablate->add_option("--sscs-periods", ablate.periods, "SSCS periods")->capture_default_str()->delimiter(',');
    c_ablate->add_option("--max-value", ablate.max_value, "Peak value for PSNR/SSIM")->capture_default_str();
    c_ablate->add_option("--space", ablate.space, "8bit | canonical")->capture_default_str();
    add_common(c_ablate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*c_synth) return cmd_synth(synth, common);
        if (*c_degrade) return cmd_degrade(degrade, common);
        if (*c_train) return cmd_train(train, common);
        if (*c_recon) return cmd_reconstruct(recon, common);
        if (*c_eval) return cmd_eval(eval, common);
        if (*c_ablate) return cmd_ablate(ablate, common);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kFormat;
    } catch (const IncompatibleCheckpoint& e) {
        std::cerr << "incompatible checkpoint: " << e.what() << "\n";
        return kFormat;
    } catch (const TrainingFailure& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const SamplingFailure& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const InvalidArgument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kUsage;
}
