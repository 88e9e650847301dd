#include "isorec/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "isorec/error.hpp"

namespace isorec {

namespace {

void require_positive_dims(std::size_t h, std::size_t w) {
    if (h == 0 || w == 0) {
        throw InvalidArgument("grid dimensions must be positive, got " + std::to_string(h) + "x" +
                              std::to_string(w));
    }
}

}  // namespace

Image2D::Image2D(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width) {
    require_positive_dims(height, width);
    data_.assign(height * width, fill);
}

Image2D::Image2D(std::size_t height, std::size_t width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
    require_positive_dims(height, width);
    if (data_.size() != height * width) {
        throw InvalidArgument("image data length " + std::to_string(data_.size()) +
                              " does not match " + std::to_string(height) + "x" + std::to_string(width));
    }
}

Volume3D::Volume3D(std::size_t depth, std::size_t height, std::size_t width, double fill)
    : depth_(depth), height_(height), width_(width) {
    require_positive_dims(depth, height);
    require_positive_dims(height, width);
    data_.assign(depth * height * width, fill);
}

Volume3D::Volume3D(std::size_t depth, std::size_t height, std::size_t width, std::vector<double> data)
    : depth_(depth), height_(height), width_(width), data_(std::move(data)) {
    require_positive_dims(depth, height);
    require_positive_dims(height, width);
    if (data_.size() != depth * height * width) {
        throw InvalidArgument("volume data length " + std::to_string(data_.size()) + " does not match " +
                              std::to_string(depth) + "x" + std::to_string(height) + "x" +
                              std::to_string(width));
    }
}

std::string_view to_string(AxialPlane plane) noexcept {
    return plane == AxialPlane::xz ? "xz" : "yz";
}

std::size_t plane_count(const Volume3D& vol, AxialPlane plane) noexcept {
    return plane == AxialPlane::xz ? vol.height() : vol.width();
}

Image2D extract_axial_slice(const Volume3D& vol, AxialPlane plane, std::size_t index) {
    if (index >= plane_count(vol, plane)) {
        throw InvalidArgument(std::string(to_string(plane)) + " slice index " + std::to_string(index) +
                              " out of range");
    }
    if (plane == AxialPlane::xz) {
        Image2D img(vol.depth(), vol.width());
        for (std::size_t z = 0; z < vol.depth(); ++z) {
            for (std::size_t x = 0; x < vol.width(); ++x) img(z, x) = vol(z, index, x);
        }
        return img;
    }
    Image2D img(vol.depth(), vol.height());
    for (std::size_t z = 0; z < vol.depth(); ++z) {
        for (std::size_t y = 0; y < vol.height(); ++y) img(z, y) = vol(z, y, index);
    }
    return img;
}

void write_axial_slice(Volume3D& vol, AxialPlane plane, std::size_t index, const Image2D& img) {
    if (index >= plane_count(vol, plane)) {
        throw InvalidArgument(std::string(to_string(plane)) + " slice index " + std::to_string(index) +
                              " out of range");
    }
    const std::size_t cols = plane == AxialPlane::xz ? vol.width() : vol.height();
    if (img.height() != vol.depth() || img.width() != cols) {
        throw InvalidArgument("slice shape " + std::to_string(img.height()) + "x" +
                              std::to_string(img.width()) + " does not match the " +
                              std::string(to_string(plane)) + " plane");
    }
    for (std::size_t z = 0; z < vol.depth(); ++z) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (plane == AxialPlane::xz) {
                vol(z, index, c) = img(z, c);
            } else {
                vol(z, c, index) = img(z, c);
            }
        }
    }
}

Volume3D insert_axial_slice(Volume3D vol, AxialPlane plane, std::size_t index, const Image2D& img) {
    write_axial_slice(vol, plane, index, img);
    return vol;
}

Image2D extract_lateral_slice(const Volume3D& vol, std::size_t z) {
    if (z >= vol.depth()) throw InvalidArgument("lateral slice index out of range");
    const auto n = vol.height() * vol.width();
    auto first = vol.data().begin() + static_cast<std::ptrdiff_t>(z * n);
    return Image2D(vol.height(), vol.width(), std::vector<double>(first, first + static_cast<std::ptrdiff_t>(n)));
}

void require_same_shape(const Image2D& a, const Image2D& b, std::string_view where) {
    if (!a.same_shape(b)) {
        throw InvalidArgument(std::string(where) + ": shape mismatch " + std::to_string(a.height()) + "x" +
                              std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                              std::to_string(b.width()));
    }
}

Image2D axpby(double a, const Image2D& x, double b, const Image2D& y) {
    require_same_shape(x, y, "axpby");
    Image2D out(x.height(), x.width());
    auto o = out.data();
    auto xs = x.data();
    auto ys = y.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = a * xs[i] + b * ys[i];
    return out;
}

Image2D operator+(const Image2D& a, const Image2D& b) { return axpby(1.0, a, 1.0, b); }
Image2D operator-(const Image2D& a, const Image2D& b) { return axpby(1.0, a, -1.0, b); }

Image2D operator*(double s, const Image2D& a) {
    Image2D out = a;
    for (double& v : out.data()) v *= s;
    return out;
}

bool all_finite(std::span<const double> values) noexcept {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void require_finite(const Image2D& img, std::string_view where) {
    if (!all_finite(img.data())) throw InvalidArgument(std::string(where) + ": non-finite input");
}

void require_finite(const Volume3D& vol, std::string_view where) {
    if (!all_finite(vol.data())) throw InvalidArgument(std::string(where) + ": non-finite input");
}

double from_u8(unsigned char v) noexcept { return static_cast<double>(v) / 127.5 - 1.0; }

unsigned char to_u8(double v) noexcept {
    const double scaled = std::round((v + 1.0) * 127.5);
    return static_cast<unsigned char>(std::clamp(scaled, 0.0, 255.0));
}

Image2D quantize_u8(const Image2D& img) {
    Image2D out = img;
    for (double& v : out.data()) v = from_u8(to_u8(v));
    return out;
}

Volume3D quantize_u8(const Volume3D& vol) {
    Volume3D out = vol;
    for (double& v : out.data()) v = from_u8(to_u8(v));
    return out;
}

}  // namespace isorec
