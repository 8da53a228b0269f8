#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "attrigraph/model.hpp"

namespace attrigraph {

/// Z for one layer: row i holds the per-channel maxima of image i.
struct ChannelMaxMatrix {
    std::string layer;
    std::size_t n_images = 0;
    std::size_t n_channels = 0;
    std::vector<float> values;  // n_images x n_channels
    std::vector<int> image_ids;
    std::vector<int> labels;

    std::span<const float> row(std::size_t i) const {
        return std::span<const float>(values).subspan(i * n_channels, n_channels);
    }
    float at(std::size_t i, std::size_t j) const { return values[i * n_channels + j]; }
};

/// Throws Error(missing_input) listing every image whose trace lacks the layer.
ChannelMaxMatrix build_channel_max(std::span<const TracedImage> corpus, std::size_t layer_index,
                                   const std::string& layer_name);

struct SelectionMethod {
    enum class Kind { top_k, cumulative_share };

    Kind kind = Kind::cumulative_share;
    std::size_t k = 5;        // Method 1
    double fraction = 0.03;   // Method 2

    static SelectionMethod top(std::size_t k) { return {Kind::top_k, k, 0.0}; }
    static SelectionMethod share(double fraction) { return {Kind::cumulative_share, 0, fraction}; }

    friend bool operator==(const SelectionMethod&, const SelectionMethod&) = default;
};

inline constexpr double kDefaultActivationShare = 0.03;

/// Method 1: the k largest channels (ties to the lower index), ascending.
std::vector<std::size_t> top_channels_m1(std::span<const float> row, std::size_t k);

/// Method 2: normalise the row over channels and take channels in
/// descending order until the cumulative share first reaches `fraction`,
/// including the crossing channel. Ascending indices; empty for a row with
/// no positive mass.
std::vector<std::size_t> top_channels_m2(std::span<const float> row, double fraction);

/// Dispatches on the method. Entries equal to -inf are never selected.
std::vector<std::size_t> select_channels(std::span<const float> row, const SelectionMethod& method);

/// A for one layer: counts[c][j] = images of class c that selected channel j.
struct AggregatedActivations {
    std::string layer;
    std::size_t n_classes = 0;
    std::size_t n_channels = 0;
    std::vector<std::uint32_t> counts;  // n_classes x n_channels
    SelectionMethod method;
    std::vector<std::size_t> blocked;   // ascending

    std::uint32_t at(std::size_t c, std::size_t j) const { return counts[c * n_channels + j]; }
    std::span<const std::uint32_t> row(std::size_t c) const {
        return std::span<const std::uint32_t>(counts).subspan(c * n_channels, n_channels);
    }

    friend bool operator==(const AggregatedActivations&, const AggregatedActivations&) = default;
};

/// Blocked channels are removed from every row before selection, so they
/// never receive counts. `labels` must align with the rows of `z`. Images
/// are partitioned across `workers` threads and the integer counts merged,
/// which gives the same result for any worker count.
AggregatedActivations aggregate_activations(const ChannelMaxMatrix& z, std::span<const int> labels,
                                            std::size_t n_classes, const SelectionMethod& method,
                                            std::span<const std::size_t> blocked = {},
                                            std::size_t workers = 1);

}  // namespace attrigraph
