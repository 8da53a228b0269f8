#include "attrigraph/influence_agg.hpp"

#include <algorithm>

#include "attrigraph/error.hpp"
#include "attrigraph/parallel.hpp"
#include "attrigraph/selection.hpp"

namespace attrigraph {

std::vector<float> InfluenceMatrix::column(std::size_t j) const {
    std::vector<float> col(prev_channels);
    for (std::size_t i = 0; i < prev_channels; ++i) col[i] = at(i, j);
    return col;
}

Map2 influence_map(const Tensor3& prev, const Kernel4& kernel, std::size_t i, std::size_t j) {
    if (i >= prev.channels || i >= kernel.in_channels || j >= kernel.out_channels) {
        throw Error(ErrorKind::index_out_of_range,
                    "influence pair (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range for input " +
                        prev.shape_string() + " and kernel " + kernel.shape_string());
    }
    return conv2d_single(prev.channel(i), kernel.slice(i, j));
}

float influence_pair(const Tensor3& prev, const Kernel4& kernel, std::size_t i, std::size_t j, float bias_share) {
    return max_value(influence_map(prev, kernel, i, j)) + bias_share;
}

Map2 influence_block_one_hop(const Tensor3& prev, const ConvStep& step) {
    const auto& k = step.kernel;
    if (prev.channels != k.in_channels) {
        throw Error(ErrorKind::shape_mismatch,
                    "influence block: input " + prev.shape_string() + " does not match kernel " + k.shape_string());
    }
    k.validate();
    Map2 block(k.in_channels, k.out_channels);
    const float inv_in = 1.0f / static_cast<float>(k.in_channels);
    for (std::size_t i = 0; i < k.in_channels; ++i) {
        const Map2 x = prev.channel(i);
        for (std::size_t j = 0; j < k.out_channels; ++j) {
            const float share = step.bias.empty() ? 0.0f : step.bias[j] * inv_in;
            block.at(i, j) = max_value(conv2d_single(x, k.slice(i, j))) + share;
        }
    }
    return block;
}

Map2 merge_two_hop(const Map2& block1, const Map2& block2) {
    if (block1.width != block2.height) {
        throw Error(ErrorKind::shape_mismatch, "merge_two_hop: block1 is " + std::to_string(block1.height) + "x" +
                                                   std::to_string(block1.width) + ", block2 is " +
                                                   std::to_string(block2.height) + "x" + std::to_string(block2.width));
    }
    Map2 out(block1.height, block2.width, kUnconnected);
    for (std::size_t i = 0; i < block1.height; ++i) {
        for (std::size_t j = 0; j < block2.width; ++j) {
            float best = kUnconnected;
            for (std::size_t k = 0; k < block1.width; ++k) {
                best = std::max(best, std::min(block1.at(i, k), block2.at(k, j)));
            }
            out.at(i, j) = best;
        }
    }
    return out;
}

InfluenceMatrix influence_matrix(const ModelManifest& model, std::size_t layer, const ForwardTrace& trace) {
    if (layer == 0 || layer >= model.layers.size()) {
        throw Error(ErrorKind::index_out_of_range,
                    "influences need a primary layer with a predecessor; got layer " + std::to_string(layer));
    }
    const auto& pl = model.layers[layer];
    if (trace.layers.size() <= layer) {
        throw Error(ErrorKind::missing_input, "trace lacks layer '" + pl.name + "'");
    }
    const Tensor3& prev = trace.layers[layer - 1].output;

    InfluenceMatrix m;
    m.layer = pl.name;
    m.prev_channels = prev.channels;
    m.cur_channels = pl.out_channels();
    m.values.assign(m.prev_channels * m.cur_channels, kUnconnected);

    const auto& inner = trace.layers[layer].inner;
    for (std::size_t b = 0; b < pl.branches.size(); ++b) {
        const auto& branch = pl.branches[b];
        Map2 block = influence_block_one_hop(prev, branch.steps[0]);
        if (branch.steps.size() == 2) {
            if (b >= inner.size() || !inner[b]) {
                throw Error(ErrorKind::missing_input,
                            "trace lacks the inner activation of layer '" + pl.name + "' branch " + std::to_string(b));
            }
            block = merge_two_hop(block, influence_block_one_hop(*inner[b], branch.steps[1]));
        }
        for (std::size_t i = 0; i < block.height; ++i) {
            for (std::size_t j = 0; j < block.width; ++j) {
                m.at(i, branch.channel_offset + j) = block.at(i, j);
            }
        }
    }
    return m;
}

std::vector<std::size_t> top_influences(const InfluenceMatrix& m, std::size_t j, std::size_t k) {
    const auto col = m.column(j);
    auto idx = top_k_indices(std::span<const float>(col), k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

AggregatedInfluences aggregate_influences(std::span<const TracedImage> corpus, const ModelManifest& model,
                                          std::size_t layer, std::size_t n_classes, std::size_t k,
                                          std::span<const std::size_t> blocked_prev,
                                          std::span<const std::size_t> blocked_cur, std::size_t workers) {
    if (layer == 0 || layer >= model.layers.size()) {
        throw Error(ErrorKind::index_out_of_range,
                    "aggregate_influences: layer " + std::to_string(layer) + " has no predecessor layer");
    }
    if (k == 0) {
        throw Error(ErrorKind::invalid_argument, "aggregate_influences: k must be at least 1");
    }

    AggregatedInfluences agg;
    agg.layer = model.layers[layer].name;
    agg.prev_layer = model.layers[layer - 1].name;
    agg.n_classes = n_classes;
    agg.prev_channels = model.layers[layer - 1].out_channels();
    agg.cur_channels = model.layers[layer].out_channels();
    agg.k = k;

    std::vector<bool> row_blocked(agg.prev_channels, false);
    std::vector<bool> col_blocked(agg.cur_channels, false);
    for (auto i : blocked_prev) {
        if (i >= agg.prev_channels) {
            throw Error(ErrorKind::index_out_of_range,
                        "blocked channel " + std::to_string(i) + " outside layer '" + agg.prev_layer + "'");
        }
        row_blocked[i] = true;
    }
    for (auto j : blocked_cur) {
        if (j >= agg.cur_channels) {
            throw Error(ErrorKind::index_out_of_range,
                        "blocked channel " + std::to_string(j) + " outside layer '" + agg.layer + "'");
        }
        col_blocked[j] = true;
    }
    for (std::size_t i = 0; i < agg.prev_channels; ++i) {
        if (row_blocked[i]) agg.blocked_prev.push_back(i);
    }
    for (std::size_t j = 0; j < agg.cur_channels; ++j) {
        if (col_blocked[j]) agg.blocked_cur.push_back(j);
    }
    for (const auto& img : corpus) {
        if (img.label < 0 || static_cast<std::size_t>(img.label) >= n_classes) {
            throw Error(ErrorKind::invalid_argument, "image " + std::to_string(img.id) + " has label " +
                                                         std::to_string(img.label) + " outside " +
                                                         std::to_string(n_classes) + " classes");
        }
    }

    const std::size_t nw = effective_workers(corpus.size(), workers);
    const std::size_t per_class = agg.prev_channels * agg.cur_channels;
    std::vector<std::vector<std::uint32_t>> partial(nw, std::vector<std::uint32_t>(n_classes * per_class, 0));
    parallel_chunks(corpus.size(), nw, [&](std::size_t w, std::size_t begin, std::size_t end) {
        auto& counts = partial[w];
        for (std::size_t n = begin; n < end; ++n) {
            const auto& img = corpus[n];
            InfluenceMatrix m;
            try {
                m = influence_matrix(model, layer, img.trace);
            } catch (const Error& e) {
                throw Error(e.kind(), "image " + std::to_string(img.id) + ": " + e.what());
            }
            for (std::size_t i = 0; i < m.prev_channels; ++i) {
                for (std::size_t j = 0; j < m.cur_channels; ++j) {
                    if (row_blocked[i] || col_blocked[j]) m.at(i, j) = kUnconnected;
                }
            }
            const std::size_t base = static_cast<std::size_t>(img.label) * per_class;
            for (std::size_t j = 0; j < m.cur_channels; ++j) {
                for (auto i : top_influences(m, j, k)) {
                    ++counts[base + i * agg.cur_channels + j];
                }
            }
        }
    });

    agg.counts.assign(n_classes * per_class, 0);
    for (const auto& counts : partial) {
        for (std::size_t x = 0; x < counts.size(); ++x) agg.counts[x] += counts[x];
    }
    return agg;
}

}  // namespace attrigraph
