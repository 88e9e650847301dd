#include "isorec/tiny_denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "isorec/error.hpp"
#include "isorec/random.hpp"

namespace isorec {

namespace {

// 3x3 convolution with zero padding on C x H x W maps. All kernels accumulate.
struct Plane {
    int height;
    int width;
    std::size_t area() const noexcept { return static_cast<std::size_t>(height) * width; }
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixView = Eigen::Map<RowMatrix>;
using ConstMatrixView = Eigen::Map<const RowMatrix>;

// Patch matrix with row (ci * 9 + tap) holding the shifted, zero-padded channel ci.
std::vector<double> im2col(const double* in, int cin, Plane p) {
    const std::size_t n = p.area();
    std::vector<double> cols(static_cast<std::size_t>(cin) * 9 * n, 0.0);
    for (int ci = 0; ci < cin; ++ci) {
        const double* src = in + ci * n;
        for (int tap = 0; tap < 9; ++tap) {
            const int dy = tap / 3 - 1, dx = tap % 3 - 1;
            const int y0 = std::max(0, -dy), y1 = std::min(p.height, p.height - dy);
            const int x0 = std::max(0, -dx), x1 = std::min(p.width, p.width - dx);
            double* row = cols.data() + (static_cast<std::size_t>(ci) * 9 + tap) * n;
            for (int y = y0; y < y1; ++y) {
                const double* srow = src + static_cast<std::size_t>(y + dy) * p.width + dx;
                double* drow = row + static_cast<std::size_t>(y) * p.width;
                std::copy(srow + x0, srow + x1, drow + x0);
            }
        }
    }
    return cols;
}

void col2im_add(const double* cols, int cin, Plane p, double* out) {
    const std::size_t n = p.area();
    for (int ci = 0; ci < cin; ++ci) {
        double* dst = out + ci * n;
        for (int tap = 0; tap < 9; ++tap) {
            const int dy = tap / 3 - 1, dx = tap % 3 - 1;
            const int y0 = std::max(0, -dy), y1 = std::min(p.height, p.height - dy);
            const int x0 = std::max(0, -dx), x1 = std::min(p.width, p.width - dx);
            const double* row = cols + (static_cast<std::size_t>(ci) * 9 + tap) * n;
            for (int y = y0; y < y1; ++y) {
                double* drow = dst + static_cast<std::size_t>(y + dy) * p.width + dx;
                const double* srow = row + static_cast<std::size_t>(y) * p.width;
                for (int x = x0; x < x1; ++x) drow[x] += srow[x];
            }
        }
    }
}

void conv_forward(const double* in, int cin, const double* w, int cout, Plane p, double* out) {
    const auto n = static_cast<Eigen::Index>(p.area());
    const std::vector<double> cols = im2col(in, cin, p);
    MatrixView o(out, cout, n);
    o.noalias() += ConstMatrixView(w, cout, cin * 9) * ConstMatrixView(cols.data(), cin * 9, n);
}

void conv_backward_input(const double* dout, int cout, const double* w, int cin, Plane p, double* din) {
    const auto n = static_cast<Eigen::Index>(p.area());
    RowMatrix dcols = ConstMatrixView(w, cout, cin * 9).transpose() * ConstMatrixView(dout, cout, n);
    col2im_add(dcols.data(), cin, p, din);
}

void conv_backward_weight(const double* in, int cin, const double* dout, int cout, Plane p, double* dw,
                          double scale) {
    const auto n = static_cast<Eigen::Index>(p.area());
    const std::vector<double> cols = im2col(in, cin, p);
    MatrixView k(dw, cout, cin * 9);
    k.noalias() += scale * (ConstMatrixView(dout, cout, n) * ConstMatrixView(cols.data(), cin * 9, n).transpose());
}

inline double sigmoid(double a) noexcept { return 1.0 / (1.0 + std::exp(-a)); }
inline double silu(double a) noexcept { return a * sigmoid(a); }
inline double silu_grad(double a) noexcept {
    const double s = sigmoid(a);
    return s * (1.0 + a * (1.0 - s));
}

void add_channel_bias(double* maps, const double* bias, int channels, std::size_t area) {
    for (int c = 0; c < channels; ++c) {
        double* m = maps + c * area;
        for (std::size_t i = 0; i < area; ++i) m[i] += bias[c];
    }
}

void accumulate_channel_sums(const double* maps, int channels, std::size_t area, double* out, double scale) {
    for (int c = 0; c < channels; ++c) {
        const double* m = maps + c * area;
        double acc = 0.0;
        for (std::size_t i = 0; i < area; ++i) acc += m[i];
        out[c] += scale * acc;
    }
}

}  // namespace

void TinyArch::validate() const {
    if (channels < 1 || channels > 256) throw InvalidArgument("tiny denoiser: channels must be in 1..256");
    if (blocks < 0 || blocks > 64) throw InvalidArgument("tiny denoiser: blocks must be in 0..64");
    if (embed_dim < 2 || embed_dim % 2 != 0) throw InvalidArgument("tiny denoiser: embed_dim must be even and >= 2");
}

std::string TinyArch::describe() const {
    return "tiny_conv(channels=" + std::to_string(channels) + ", blocks=" + std::to_string(blocks) +
           ", embed_dim=" + std::to_string(embed_dim) + ")";
}

struct TinyDenoiser::Activations {
    Plane plane{};
    std::vector<double> emb;
    std::vector<std::vector<double>> h;  // h[0] after the input conv, h[b+1] after block b
    std::vector<std::vector<double>> a;  // pre-activations inside each block
    std::vector<std::vector<double>> u;  // silu(a)
    std::vector<double> s;               // silu(h.back())
    std::vector<double> y;
};

TinyDenoiser::TinyDenoiser(TinyArch arch) : arch_(arch) {
    arch_.validate();
    const auto c = static_cast<std::size_t>(arch_.channels);
    const auto e = static_cast<std::size_t>(arch_.embed_dim);
    std::size_t off = 0;
    add_slot("input.weight", {c, 1, 3, 3}, layout_.in_w);
    add_slot("input.bias", {c}, layout_.in_b);
    for (int b = 0; b < arch_.blocks; ++b) {
        const std::string prefix = "block" + std::to_string(b) + ".";
        layout_.w1.push_back(0);
        layout_.b1.push_back(0);
        layout_.temb.push_back(0);
        layout_.w2.push_back(0);
        layout_.b2.push_back(0);
        add_slot(prefix + "conv1.weight", {c, c, 3, 3}, layout_.w1.back());
        add_slot(prefix + "conv1.bias", {c}, layout_.b1.back());
        add_slot(prefix + "time.weight", {c, e}, layout_.temb.back());
        add_slot(prefix + "conv2.weight", {c, c, 3, 3}, layout_.w2.back());
        add_slot(prefix + "conv2.bias", {c}, layout_.b2.back());
    }
    add_slot("output.weight", {1, c, 3, 3}, layout_.out_w);
    add_slot("output.bias", {1}, layout_.out_b);
    for (const auto& s : slots_) off = std::max(off, s.offset + s.size);
    params_.assign(off, 0.0);
}

void TinyDenoiser::add_slot(const std::string& name, std::vector<std::size_t> shape, std::size_t& offset_out) {
    std::size_t size = 1;
    for (auto d : shape) size *= d;
    const std::size_t offset = slots_.empty() ? 0 : slots_.back().offset + slots_.back().size;
    slots_.push_back({name, std::move(shape), offset, size});
    offset_out = offset;
}

TinyDenoiser TinyDenoiser::initialized(TinyArch arch, RandomSource& rng) {
    TinyDenoiser model(arch);
    auto p = model.parameters();
    for (const auto& slot : model.slots_) {
        const bool is_weight = slot.shape.size() > 1;
        if (!is_weight || slot.name.rfind("output.", 0) == 0) continue;
        // fan-in: input channels * 9 for convs, embedding width for the time projection
        const double fan_in = slot.shape.size() == 4 ? static_cast<double>(slot.shape[1] * 9)
                                                     : static_cast<double>(slot.shape[1]);
        double scale = std::sqrt(2.0 / fan_in);
        // keep the residual branches small at init
        if (slot.name.find("conv2") != std::string::npos) scale *= 0.1;
        if (slot.name.find("time") != std::string::npos) scale = 1.0 / std::sqrt(fan_in);
        for (std::size_t i = 0; i < slot.size; ++i) p[slot.offset + i] = scale * rng.normal();
    }
    model.round_to_float32();
    return model;
}

void TinyDenoiser::round_to_float32() noexcept {
    for (double& v : params_) v = static_cast<double>(static_cast<float>(v));
}

std::vector<double> TinyDenoiser::embedding(int t) const {
    const int half = arch_.embed_dim / 2;
    std::vector<double> emb(static_cast<std::size_t>(arch_.embed_dim));
    for (int k = 0; k < half; ++k) {
        const double freq = std::exp(-std::log(10000.0) * k / half);
        emb[static_cast<std::size_t>(k)] = std::sin(t * freq);
        emb[static_cast<std::size_t>(k + half)] = std::cos(t * freq);
    }
    return emb;
}

TinyDenoiser::Activations TinyDenoiser::run_forward(const Image2D& x, int t) const {
    const int c = arch_.channels;
    const int e = arch_.embed_dim;
    Activations act;
    act.plane = {static_cast<int>(x.height()), static_cast<int>(x.width())};
    const std::size_t n = act.plane.area();
    const double* p = params_.data();
    act.emb = embedding(t);

    act.h.assign(static_cast<std::size_t>(arch_.blocks) + 1, {});
    act.h[0].assign(c * n, 0.0);
    conv_forward(x.data().data(), 1, p + layout_.in_w, c, act.plane, act.h[0].data());
    add_channel_bias(act.h[0].data(), p + layout_.in_b, c, n);

    std::vector<double> bias(static_cast<std::size_t>(c));
    for (int b = 0; b < arch_.blocks; ++b) {
        const auto bi = static_cast<std::size_t>(b);
        const double* temb = p + layout_.temb[bi];
        for (int ch = 0; ch < c; ++ch) {
            double acc = p[layout_.b1[bi] + ch];
            for (int k = 0; k < e; ++k) acc += temb[ch * e + k] * act.emb[static_cast<std::size_t>(k)];
            bias[static_cast<std::size_t>(ch)] = acc;
        }
        std::vector<double> pre(c * n, 0.0);
        conv_forward(act.h[bi].data(), c, p + layout_.w1[bi], c, act.plane, pre.data());
        add_channel_bias(pre.data(), bias.data(), c, n);
        std::vector<double> post(pre.size());
        std::transform(pre.begin(), pre.end(), post.begin(), silu);

        std::vector<double> next = act.h[bi];
        conv_forward(post.data(), c, p + layout_.w2[bi], c, act.plane, next.data());
        add_channel_bias(next.data(), p + layout_.b2[bi], c, n);
        act.h[bi + 1] = std::move(next);
        act.a.push_back(std::move(pre));
        act.u.push_back(std::move(post));
    }

    act.s.resize(act.h.back().size());
    std::transform(act.h.back().begin(), act.h.back().end(), act.s.begin(), silu);
    act.y.assign(n, p[layout_.out_b]);
    conv_forward(act.s.data(), c, p + layout_.out_w, 1, act.plane, act.y.data());
    return act;
}

Image2D TinyDenoiser::forward(const Image2D& x, int t) const {
    require_finite(x, "tiny denoiser");
    auto act = run_forward(x, t);
    return Image2D(x.height(), x.width(), std::move(act.y));
}

Image2D TinyDenoiser::predict_noise(const Image2D& x_t, int t, const NoiseSchedule& schedule) const {
    if (t < 1 || t > schedule.steps()) throw InvalidArgument("tiny denoiser: timestep out of range");
    return forward(x_t, t);
}

double TinyDenoiser::loss_and_gradient(const Image2D& x, int t, const Image2D& target, std::span<double> grad,
                                       double weight) const {
    require_same_shape(x, target, "loss_and_gradient");
    if (grad.size() != params_.size()) throw InvalidArgument("loss_and_gradient: gradient buffer has wrong length");
    require_finite(x, "loss_and_gradient");
    const auto act = run_forward(x, t);
    const int c = arch_.channels;
    const int e = arch_.embed_dim;
    const std::size_t n = act.plane.area();
    const double* p = params_.data();
    double* g = grad.data();

    const auto tgt = target.data();
    double loss = 0.0;
    std::vector<double> dy(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double diff = act.y[i] - tgt[i];
        loss += diff * diff;
        dy[i] = 2.0 * diff / static_cast<double>(n);
    }
    loss /= static_cast<double>(n);

    g[layout_.out_b] += weight * std::accumulate(dy.begin(), dy.end(), 0.0);
    conv_backward_weight(act.s.data(), c, dy.data(), 1, act.plane, g + layout_.out_w, weight);
    std::vector<double> dh(c * n, 0.0);
    conv_backward_input(dy.data(), 1, p + layout_.out_w, c, act.plane, dh.data());
    const auto& h_last = act.h.back();
    for (std::size_t i = 0; i < dh.size(); ++i) dh[i] *= silu_grad(h_last[i]);

    for (int b = arch_.blocks - 1; b >= 0; --b) {
        const auto bi = static_cast<std::size_t>(b);
        // residual branch: r = conv2(u) + b2, dr = dh
        accumulate_channel_sums(dh.data(), c, n, g + layout_.b2[bi], weight);
        conv_backward_weight(act.u[bi].data(), c, dh.data(), c, act.plane, g + layout_.w2[bi], weight);
        std::vector<double> da(c * n, 0.0);
        conv_backward_input(dh.data(), c, p + layout_.w2[bi], c, act.plane, da.data());
        const auto& pre = act.a[bi];
        for (std::size_t i = 0; i < da.size(); ++i) da[i] *= silu_grad(pre[i]);

        std::vector<double> channel_sums(static_cast<std::size_t>(c), 0.0);
        accumulate_channel_sums(da.data(), c, n, channel_sums.data(), 1.0);
        for (int ch = 0; ch < c; ++ch) {
            const double s = channel_sums[static_cast<std::size_t>(ch)];
            g[layout_.b1[bi] + ch] += weight * s;
            for (int k = 0; k < e; ++k) {
                g[layout_.temb[bi] + ch * e + k] += weight * s * act.emb[static_cast<std::size_t>(k)];
            }
        }
        conv_backward_weight(act.h[bi].data(), c, da.data(), c, act.plane, g + layout_.w1[bi], weight);
        conv_backward_input(da.data(), c, p + layout_.w1[bi], c, act.plane, dh.data());
    }

    accumulate_channel_sums(dh.data(), c, n, g + layout_.in_b, weight);
    conv_backward_weight(x.data().data(), 1, dh.data(), c, act.plane, g + layout_.in_w, weight);
    return loss;
}

}  // namespace isorec
