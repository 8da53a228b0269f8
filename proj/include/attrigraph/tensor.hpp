#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace attrigraph {

/// Single-channel 2D map, row-major.
struct Map2 {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> data;

    Map2() = default;
    Map2(std::size_t h, std::size_t w, float fill = 0.0f) : height(h), width(w), data(h * w, fill) {}

    float& at(std::size_t r, std::size_t c) { return data[r * width + c]; }
    float at(std::size_t r, std::size_t c) const { return data[r * width + c]; }
    bool empty() const { return data.empty(); }

    friend bool operator==(const Map2&, const Map2&) = default;
};

/// Activation volume laid out as (h, w, c) with the channel index fastest.
struct Tensor3 {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<float> data;

    Tensor3() = default;
    Tensor3(std::size_t h, std::size_t w, std::size_t c, float fill = 0.0f)
        : height(h), width(w), channels(c), data(h * w * c, fill) {}

    std::size_t index(std::size_t r, std::size_t col, std::size_t ch) const {
        return (r * width + col) * channels + ch;
    }
    float& at(std::size_t r, std::size_t col, std::size_t ch) { return data[index(r, col, ch)]; }
    float at(std::size_t r, std::size_t col, std::size_t ch) const { return data[index(r, col, ch)]; }
    bool empty() const { return data.empty(); }

    /// Copy of channel `ch` as a 2D map.
    Map2 channel(std::size_t ch) const;
    void set_channel(std::size_t ch, const Map2& map);

    std::string shape_string() const;

    friend bool operator==(const Tensor3&, const Tensor3&) = default;
};

/// Convolution kernel bank laid out as (kh, kw, in, out).
struct Kernel4 {
    std::size_t kh = 0;
    std::size_t kw = 0;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::vector<float> data;

    Kernel4() = default;
    Kernel4(std::size_t h, std::size_t w, std::size_t in, std::size_t out, float fill = 0.0f)
        : kh(h), kw(w), in_channels(in), out_channels(out), data(h * w * in * out, fill) {}

    std::size_t index(std::size_t y, std::size_t x, std::size_t i, std::size_t j) const {
        return ((y * kw + x) * in_channels + i) * out_channels + j;
    }
    float& at(std::size_t y, std::size_t x, std::size_t i, std::size_t j) { return data[index(y, x, i, j)]; }
    float at(std::size_t y, std::size_t x, std::size_t i, std::size_t j) const { return data[index(y, x, i, j)]; }

    /// The 2D slice K[:, :, i, j].
    Map2 slice(std::size_t i, std::size_t j) const;

    /// Throws unless the extents are odd, non-zero, and `data` has the right length.
    void validate() const;

    std::string shape_string() const;

    friend bool operator==(const Kernel4&, const Kernel4&) = default;
};

// Convolutions use the cross-correlation convention (no kernel flip), stride 1
// and zero "same" padding, so outputs keep the input's spatial extents.

Map2 conv2d_single(const Map2& x, const Map2& k);

/// Y[:, :, j] = sum_i conv2d_single(X[:, :, i], K[:, :, i, j]) + bias[j].
/// `bias` may be empty.
Tensor3 conv2d_full(const Tensor3& x, const Kernel4& k, std::span<const float> bias = {});

Tensor3 relu(const Tensor3& x);

/// 2x2 window, stride 2, per-channel max. Height and width must be even.
Tensor3 maxpool2(const Tensor3& x);

/// Global max pool: per-channel maximum over all spatial positions.
std::vector<float> channel_max(const Tensor3& x);

float max_value(const Map2& m);

}  // namespace attrigraph
