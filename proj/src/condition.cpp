#include "isorec/condition.hpp"

#include <algorithm>
#include <string>

#include "isorec/error.hpp"

namespace isorec {

namespace {

void require_alpha(int alpha, const char* where) {
    if (alpha < 1) throw InvalidArgument(std::string(where) + ": alpha must be >= 1, got " + std::to_string(alpha));
}

}  // namespace

void ConditionPair::validate() const {
    require_alpha(alpha, "condition");
    if (!x_con_0.same_shape(mask)) throw InvalidArgument("condition: mask shape differs from payload");
    const auto a = static_cast<std::size_t>(alpha);
    if (mask.height() % a != 0) throw InvalidArgument("condition: height not a multiple of alpha");
    for (std::size_t r = 0; r < mask.height(); ++r) {
        const double expected = r % a == 0 ? 1.0 : 0.0;
        const auto row = mask.row(r);
        for (double m : row) {
            if (m != expected) throw InvalidArgument("condition: malformed mask at row " + std::to_string(r));
        }
        if (expected == 0.0) {
            for (double v : x_con_0.row(r)) {
                if (v != 0.0) throw InvalidArgument("condition: nonzero payload outside the mask");
            }
        }
    }
}

ConditionPair pad_axial(const Image2D& x_axi, int alpha) {
    require_alpha(alpha, "pad_axial");
    require_finite(x_axi, "pad_axial");
    const auto a = static_cast<std::size_t>(alpha);
    ConditionPair pair{Image2D(x_axi.height() * a, x_axi.width()), Image2D(x_axi.height() * a, x_axi.width()),
                       alpha};
    for (std::size_t k = 0; k < x_axi.height(); ++k) {
        auto src = x_axi.row(k);
        auto dst = pair.x_con_0.row(k * a);
        std::copy(src.begin(), src.end(), dst.begin());
        for (double& m : pair.mask.row(k * a)) m = 1.0;
    }
    return pair;
}

Image2D unpad_axial(const ConditionPair& pair) {
    pair.validate();
    const auto a = static_cast<std::size_t>(pair.alpha);
    Image2D out(pair.x_con_0.height() / a, pair.x_con_0.width());
    for (std::size_t k = 0; k < out.height(); ++k) {
        auto src = pair.x_con_0.row(k * a);
        std::copy(src.begin(), src.end(), out.row(k).begin());
    }
    return out;
}

Volume3D downsample_axial(const Volume3D& vol, int alpha) {
    require_alpha(alpha, "downsample_axial");
    require_finite(vol, "downsample_axial");
    const auto a = static_cast<std::size_t>(alpha);
    if (vol.depth() % a != 0) {
        throw InvalidArgument("downsample_axial: depth " + std::to_string(vol.depth()) +
                              " not divisible by alpha " + std::to_string(alpha));
    }
    Volume3D out(vol.depth() / a, vol.height(), vol.width());
    for (std::size_t z = 0; z < out.depth(); ++z) {
        for (std::size_t y = 0; y < vol.height(); ++y) {
            for (std::size_t x = 0; x < vol.width(); ++x) {
                double acc = 0.0;
                for (std::size_t k = 0; k < a; ++k) acc += vol(z * a + k, y, x);
                out(z, y, x) = acc / static_cast<double>(a);
            }
        }
    }
    return out;
}

Image2D downsample_rows(const Image2D& img, int alpha) {
    Volume3D as_volume(img.height(), 1, img.width(), std::vector<double>(img.data().begin(), img.data().end()));
    const Volume3D pooled = downsample_axial(as_volume, alpha);
    return Image2D(pooled.depth(), pooled.width(), std::vector<double>(pooled.data().begin(), pooled.data().end()));
}

Image2D replicate_rows(const Image2D& img, int alpha) {
    require_alpha(alpha, "replicate_rows");
    const auto a = static_cast<std::size_t>(alpha);
    Image2D out(img.height() * a, img.width());
    for (std::size_t r = 0; r < out.height(); ++r) {
        auto src = img.row(r / a);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

}  // namespace isorec
