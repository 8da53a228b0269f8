#include "attrigraph/tensor.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "attrigraph/error.hpp"

namespace attrigraph {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::shape_mismatch: return "shape_mismatch";
        case ErrorKind::index_out_of_range: return "index_out_of_range";
        case ErrorKind::invalid_argument: return "invalid_argument";
        case ErrorKind::missing_input: return "missing_input";
        case ErrorKind::format: return "format";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

namespace {

std::string map_shape(const Map2& m) {
    std::ostringstream os;
    os << m.height << "x" << m.width;
    return os.str();
}

}  // namespace

Map2 Tensor3::channel(std::size_t ch) const {
    if (ch >= channels) {
        throw Error(ErrorKind::index_out_of_range,
                    "channel " + std::to_string(ch) + " out of range for tensor " + shape_string());
    }
    Map2 out(height, width);
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            out.at(r, c) = at(r, c, ch);
        }
    }
    return out;
}

void Tensor3::set_channel(std::size_t ch, const Map2& map) {
    if (ch >= channels || map.height != height || map.width != width) {
        throw Error(ErrorKind::shape_mismatch,
                    "cannot write map " + map_shape(map) + " into channel " + std::to_string(ch) +
                        " of tensor " + shape_string());
    }
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            at(r, c, ch) = map.at(r, c);
        }
    }
}

std::string Tensor3::shape_string() const {
    std::ostringstream os;
    os << height << "x" << width << "x" << channels;
    return os.str();
}

Map2 Kernel4::slice(std::size_t i, std::size_t j) const {
    if (i >= in_channels || j >= out_channels) {
        throw Error(ErrorKind::index_out_of_range,
                    "kernel slice (" + std::to_string(i) + ", " + std::to_string(j) +
                        ") out of range for kernel " + shape_string());
    }
    Map2 out(kh, kw);
    for (std::size_t y = 0; y < kh; ++y) {
        for (std::size_t x = 0; x < kw; ++x) {
            out.at(y, x) = at(y, x, i, j);
        }
    }
    return out;
}

void Kernel4::validate() const {
    if (kh == 0 || kw == 0 || in_channels == 0 || out_channels == 0) {
        throw Error(ErrorKind::shape_mismatch, "kernel " + shape_string() + " has an empty extent");
    }
    if (kh % 2 == 0 || kw % 2 == 0) {
        throw Error(ErrorKind::shape_mismatch,
                    "kernel " + shape_string() + " must have odd spatial extents");
    }
    if (data.size() != kh * kw * in_channels * out_channels) {
        throw Error(ErrorKind::shape_mismatch,
                    "kernel " + shape_string() + " holds " + std::to_string(data.size()) + " values");
    }
}

std::string Kernel4::shape_string() const {
    std::ostringstream os;
    os << kh << "x" << kw << "x" << in_channels << "x" << out_channels;
    return os.str();
}

Map2 conv2d_single(const Map2& x, const Map2& k) {
    if (x.empty()) {
        throw Error(ErrorKind::shape_mismatch, "conv2d_single: empty input " + map_shape(x));
    }
    if (k.height % 2 == 0 || k.width % 2 == 0 || k.empty()) {
        throw Error(ErrorKind::shape_mismatch,
                    "conv2d_single: kernel " + map_shape(k) + " must have odd extents (input " +
                        map_shape(x) + ")");
    }
    const auto ph = static_cast<std::ptrdiff_t>(k.height / 2);
    const auto pw = static_cast<std::ptrdiff_t>(k.width / 2);
    const auto H = static_cast<std::ptrdiff_t>(x.height);
    const auto W = static_cast<std::ptrdiff_t>(x.width);

    Map2 out(x.height, x.width);
    for (std::ptrdiff_t r = 0; r < H; ++r) {
        for (std::ptrdiff_t c = 0; c < W; ++c) {
            float acc = 0.0f;
            for (std::ptrdiff_t dy = -ph; dy <= ph; ++dy) {
                const std::ptrdiff_t rr = r + dy;
                if (rr < 0 || rr >= H) continue;
                for (std::ptrdiff_t dx = -pw; dx <= pw; ++dx) {
                    const std::ptrdiff_t cc = c + dx;
                    if (cc < 0 || cc >= W) continue;
                    acc += x.data[static_cast<std::size_t>(rr * W + cc)] *
                           k.at(static_cast<std::size_t>(dy + ph), static_cast<std::size_t>(dx + pw));
                }
            }
            out.data[static_cast<std::size_t>(r * W + c)] = acc;
        }
    }
    return out;
}

Tensor3 conv2d_full(const Tensor3& x, const Kernel4& k, std::span<const float> bias) {
    k.validate();
    if (x.channels != k.in_channels) {
        throw Error(ErrorKind::shape_mismatch,
                    "conv2d_full: input " + x.shape_string() + " does not match kernel " + k.shape_string());
    }
    if (!bias.empty() && bias.size() != k.out_channels) {
        throw Error(ErrorKind::shape_mismatch,
                    "conv2d_full: bias of length " + std::to_string(bias.size()) + " for kernel " +
                        k.shape_string());
    }
    if (x.empty()) {
        throw Error(ErrorKind::shape_mismatch, "conv2d_full: empty input " + x.shape_string());
    }

    Tensor3 out(x.height, x.width, k.out_channels);
    const auto ph = static_cast<std::ptrdiff_t>(k.kh / 2);
    const auto pw = static_cast<std::ptrdiff_t>(k.kw / 2);
    const auto H = static_cast<std::ptrdiff_t>(x.height);
    const auto W = static_cast<std::ptrdiff_t>(x.width);
    std::vector<float> acc(k.out_channels);

    for (std::ptrdiff_t r = 0; r < H; ++r) {
        for (std::ptrdiff_t c = 0; c < W; ++c) {
            std::fill(acc.begin(), acc.end(), 0.0f);
            for (std::ptrdiff_t dy = -ph; dy <= ph; ++dy) {
                const std::ptrdiff_t rr = r + dy;
                if (rr < 0 || rr >= H) continue;
                for (std::ptrdiff_t dx = -pw; dx <= pw; ++dx) {
                    const std::ptrdiff_t cc = c + dx;
                    if (cc < 0 || cc >= W) continue;
                    const float* px = &x.data[x.index(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc), 0)];
                    const float* kw = &k.data[k.index(static_cast<std::size_t>(dy + ph),
                                                      static_cast<std::size_t>(dx + pw), 0, 0)];
                    for (std::size_t i = 0; i < k.in_channels; ++i) {
                        const float v = px[i];
                        const float* krow = kw + i * k.out_channels;
                        for (std::size_t j = 0; j < k.out_channels; ++j) {
                            acc[j] += v * krow[j];
                        }
                    }
                }
            }
            float* po = &out.data[out.index(static_cast<std::size_t>(r), static_cast<std::size_t>(c), 0)];
            for (std::size_t j = 0; j < k.out_channels; ++j) {
                po[j] = bias.empty() ? acc[j] : acc[j] + bias[j];
            }
        }
    }
    return out;
}

Tensor3 relu(const Tensor3& x) {
    Tensor3 out = x;
    for (float& v : out.data) {
        v = std::max(v, 0.0f);
    }
    return out;
}

Tensor3 maxpool2(const Tensor3& x) {
    if (x.height % 2 != 0 || x.width % 2 != 0 || x.empty()) {
        throw Error(ErrorKind::shape_mismatch,
                    "maxpool2: spatial extents of " + x.shape_string() + " must be even and non-zero");
    }
    Tensor3 out(x.height / 2, x.width / 2, x.channels);
    for (std::size_t r = 0; r < out.height; ++r) {
        for (std::size_t c = 0; c < out.width; ++c) {
            for (std::size_t ch = 0; ch < x.channels; ++ch) {
                out.at(r, c, ch) = std::max({x.at(2 * r, 2 * c, ch), x.at(2 * r, 2 * c + 1, ch),
                                             x.at(2 * r + 1, 2 * c, ch), x.at(2 * r + 1, 2 * c + 1, ch)});
            }
        }
    }
    return out;
}

std::vector<float> channel_max(const Tensor3& x) {
    if (x.empty()) {
        throw Error(ErrorKind::shape_mismatch, "channel_max: empty tensor " + x.shape_string());
    }
    std::vector<float> out(x.channels, -std::numeric_limits<float>::infinity());
    for (std::size_t p = 0; p < x.height * x.width; ++p) {
        const float* px = &x.data[p * x.channels];
        for (std::size_t ch = 0; ch < x.channels; ++ch) {
            out[ch] = std::max(out[ch], px[ch]);
        }
    }
    return out;
}

float max_value(const Map2& m) {
    if (m.empty()) {
        throw Error(ErrorKind::shape_mismatch, "max_value: empty map");
    }
    return *std::max_element(m.data.begin(), m.data.end());
}

}  // namespace attrigraph
