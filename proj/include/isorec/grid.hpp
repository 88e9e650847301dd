#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace isorec {

/// Dense row-major 2D grid of reals. Canonical value range is [-1, 1]; the
/// range is a convention of the I/O boundary and is not enforced here.
class Image2D {
public:
    Image2D() = default;
    Image2D(std::size_t height, std::size_t width, double fill = 0.0);
    Image2D(std::size_t height, std::size_t width, std::vector<double> data);

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t row, std::size_t col) noexcept { return data_[row * width_ + col]; }
    double operator()(std::size_t row, std::size_t col) const noexcept { return data_[row * width_ + col]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * width_, width_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * width_, width_}; }

    bool same_shape(const Image2D& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_;
    }

    friend bool operator==(const Image2D&, const Image2D&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> data_;
};

/// Dense 3D grid, z-major then row-major within each z slice.
class Volume3D {
public:
    Volume3D() = default;
    Volume3D(std::size_t depth, std::size_t height, std::size_t width, double fill = 0.0);
    Volume3D(std::size_t depth, std::size_t height, std::size_t width, std::vector<double> data);

    std::size_t depth() const noexcept { return depth_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t z, std::size_t y, std::size_t x) noexcept {
        return data_[(z * height_ + y) * width_ + x];
    }
    double operator()(std::size_t z, std::size_t y, std::size_t x) const noexcept {
        return data_[(z * height_ + y) * width_ + x];
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool same_shape(const Volume3D& other) const noexcept {
        return depth_ == other.depth_ && height_ == other.height_ && width_ == other.width_;
    }

    friend bool operator==(const Volume3D&, const Volume3D&) = default;

private:
    std::size_t depth_ = 0;
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> data_;
};

/// Planes whose rows run along z. xz is addressed by a y index, yz by an x index.
enum class AxialPlane { xz, yz };

std::string_view to_string(AxialPlane plane) noexcept;

/// Number of planes of the given orientation in `vol`.
std::size_t plane_count(const Volume3D& vol, AxialPlane plane) noexcept;

Image2D extract_axial_slice(const Volume3D& vol, AxialPlane plane, std::size_t index);

/// Returns a copy of `vol` with one plane replaced.
Volume3D insert_axial_slice(Volume3D vol, AxialPlane plane, std::size_t index, const Image2D& img);

/// In-place variant used when reassembling large volumes.
void write_axial_slice(Volume3D& vol, AxialPlane plane, std::size_t index, const Image2D& img);

/// The xy slice at depth z.
Image2D extract_lateral_slice(const Volume3D& vol, std::size_t z);

// Elementwise helpers. All throw InvalidArgument on shape mismatch.
Image2D operator+(const Image2D& a, const Image2D& b);
Image2D operator-(const Image2D& a, const Image2D& b);
Image2D operator*(double s, const Image2D& a);

/// a*x + b*y, elementwise.
Image2D axpby(double a, const Image2D& x, double b, const Image2D& y);

bool all_finite(std::span<const double> values) noexcept;

/// Throws InvalidArgument naming `where` if any value is NaN or infinite.
void require_finite(const Image2D& img, std::string_view where);
void require_finite(const Volume3D& vol, std::string_view where);
void require_same_shape(const Image2D& a, const Image2D& b, std::string_view where);

// 8-bit external data maps through v/127.5 - 1 and back with rounding and clamping.
double from_u8(unsigned char v) noexcept;
unsigned char to_u8(double v) noexcept;

/// Round-trips every value through the 8-bit mapping.
Image2D quantize_u8(const Image2D& img);
Volume3D quantize_u8(const Volume3D& vol);

}  // namespace isorec
