#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "attrigraph/model.hpp"

namespace attrigraph {

inline constexpr std::size_t kDefaultInfluenceTopK = 5;

/// Marks channel pairs that no branch connects; never selected.
inline constexpr float kUnconnected = -std::numeric_limits<float>::infinity();

/// L for one image and layer: entry (i, j) is the influence of channel i of
/// the previous layer on channel j of this layer.
struct InfluenceMatrix {
    std::string layer;
    std::size_t prev_channels = 0;
    std::size_t cur_channels = 0;
    std::vector<float> values;  // prev x cur

    float at(std::size_t i, std::size_t j) const { return values[i * cur_channels + j]; }
    float& at(std::size_t i, std::size_t j) { return values[i * cur_channels + j]; }
    std::vector<float> column(std::size_t j) const;
};

/// The 2D contribution of input channel i to output channel j:
/// conv2d_single(prev[:, :, i], kernel[:, :, i, j]).
Map2 influence_map(const Tensor3& prev, const Kernel4& kernel, std::size_t i, std::size_t j);

/// max over positions of influence_map(prev, kernel, i, j), plus `bias_share`.
float influence_pair(const Tensor3& prev, const Kernel4& kernel, std::size_t i, std::size_t j,
                     float bias_share = 0.0f);

/// in_channels x out_channels block of influences through one conv step.
/// A step bias b[j] is spread evenly over the inputs (b[j] / in_channels per
/// pair) so the maps of column j still sum to the step's pre-activation.
Map2 influence_block_one_hop(const Tensor3& prev, const ConvStep& step);

/// Widest-path composition through an inner layer:
/// out(i, j) = max_k min(block1(i, k), block2(k, j)).
Map2 merge_two_hop(const Map2& block1, const Map2& block2);

/// Full prev x cur influence matrix of primary layer `layer` (>= 1) for one
/// traced image. One-step branches contribute their block directly; two-step
/// branches merge the step-1 block (from the previous layer's output) with
/// the step-2 block (from the captured inner activation).
InfluenceMatrix influence_matrix(const ModelManifest& model, std::size_t layer, const ForwardTrace& trace);

/// I for one layer: counts[c][i][j] = images of class c for which prev
/// channel i was among the top-k entries of column j.
struct AggregatedInfluences {
    std::string layer;
    std::string prev_layer;
    std::size_t n_classes = 0;
    std::size_t prev_channels = 0;
    std::size_t cur_channels = 0;
    std::size_t k = kDefaultInfluenceTopK;
    std::vector<std::uint32_t> counts;  // n_classes x prev x cur
    std::vector<std::size_t> blocked_prev;
    std::vector<std::size_t> blocked_cur;

    std::size_t index(std::size_t c, std::size_t i, std::size_t j) const {
        return (c * prev_channels + i) * cur_channels + j;
    }
    std::uint32_t at(std::size_t c, std::size_t i, std::size_t j) const { return counts[index(c, i, j)]; }

    friend bool operator==(const AggregatedInfluences&, const AggregatedInfluences&) = default;
};

/// Top-k selection per column j of one influence matrix (ties to the lower
/// prev index, -inf never selected). Returns prev indices, ascending.
std::vector<std::size_t> top_influences(const InfluenceMatrix& m, std::size_t j, std::size_t k);

/// Blocked prev channels (rows) and blocked current channels (columns) are
/// masked to kUnconnected before selection. Per-image work is spread over
/// `workers` threads; the count merge is exact, so the result does not
/// depend on the worker count.
AggregatedInfluences aggregate_influences(std::span<const TracedImage> corpus, const ModelManifest& model,
                                          std::size_t layer, std::size_t n_classes,
                                          std::size_t k = kDefaultInfluenceTopK,
                                          std::span<const std::size_t> blocked_prev = {},
                                          std::span<const std::size_t> blocked_cur = {},
                                          std::size_t workers = 1);

}  // namespace attrigraph
