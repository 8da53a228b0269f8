#include "attrigraph/activation_agg.hpp"

#include <algorithm>
#include <limits>

#include "attrigraph/error.hpp"
#include "attrigraph/parallel.hpp"
#include "attrigraph/selection.hpp"

namespace attrigraph {

ChannelMaxMatrix build_channel_max(std::span<const TracedImage> corpus, std::size_t layer_index,
                                   const std::string& layer_name) {
    if (corpus.empty()) {
        throw Error(ErrorKind::invalid_argument, "build_channel_max: empty corpus for layer '" + layer_name + "'");
    }
    std::string missing;
    for (const auto& img : corpus) {
        if (img.trace.layers.size() <= layer_index || img.trace.layers[layer_index].output.empty()) {
            if (!missing.empty()) missing += ", ";
            missing += std::to_string(img.id);
        }
    }
    if (!missing.empty()) {
        throw Error(ErrorKind::missing_input,
                    "no trace of layer '" + layer_name + "' for image ids: " + missing);
    }

    ChannelMaxMatrix z;
    z.layer = layer_name;
    z.n_images = corpus.size();
    z.n_channels = corpus.front().trace.layers[layer_index].output.channels;
    z.values.reserve(z.n_images * z.n_channels);
    for (const auto& img : corpus) {
        const auto& out = img.trace.layers[layer_index].output;
        if (out.channels != z.n_channels) {
            throw Error(ErrorKind::shape_mismatch, "image " + std::to_string(img.id) + " has " +
                                                       std::to_string(out.channels) + " channels in layer '" +
                                                       layer_name + "', expected " + std::to_string(z.n_channels));
        }
        const auto maxima = channel_max(out);
        z.values.insert(z.values.end(), maxima.begin(), maxima.end());
        z.image_ids.push_back(img.id);
        z.labels.push_back(img.label);
    }
    return z;
}

std::vector<std::size_t> top_channels_m1(std::span<const float> row, std::size_t k) {
    if (k == 0) {
        throw Error(ErrorKind::invalid_argument, "top_channels_m1: k must be at least 1");
    }
    auto idx = top_k_indices(row, k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

std::vector<std::size_t> top_channels_m2(std::span<const float> row, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw Error(ErrorKind::invalid_argument,
                    "top_channels_m2: fraction " + std::to_string(fraction) + " outside (0, 1)");
    }
    auto idx = cumulative_share_prefix(row, fraction);
    std::sort(idx.begin(), idx.end());
    return idx;
}

std::vector<std::size_t> select_channels(std::span<const float> row, const SelectionMethod& method) {
    return method.kind == SelectionMethod::Kind::top_k ? top_channels_m1(row, method.k)
                                                       : top_channels_m2(row, method.fraction);
}

AggregatedActivations aggregate_activations(const ChannelMaxMatrix& z, std::span<const int> labels,
                                            std::size_t n_classes, const SelectionMethod& method,
                                            std::span<const std::size_t> blocked, std::size_t workers) {
    if (labels.size() != z.n_images) {
        throw Error(ErrorKind::shape_mismatch, "aggregate_activations: " + std::to_string(labels.size()) +
                                                   " labels for " + std::to_string(z.n_images) + " rows of layer '" +
                                                   z.layer + "'");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes) {
            throw Error(ErrorKind::invalid_argument, "aggregate_activations: row " + std::to_string(i) +
                                                         " has label " + std::to_string(labels[i]) + " outside " +
                                                         std::to_string(n_classes) + " classes");
        }
    }
    std::vector<bool> is_blocked(z.n_channels, false);
    for (auto ch : blocked) {
        if (ch >= z.n_channels) {
            throw Error(ErrorKind::index_out_of_range, "blocked channel " + std::to_string(ch) + " outside layer '" +
                                                           z.layer + "' with " + std::to_string(z.n_channels) +
                                                           " channels");
        }
        is_blocked[ch] = true;
    }

    AggregatedActivations a;
    a.layer = z.layer;
    a.n_classes = n_classes;
    a.n_channels = z.n_channels;
    a.method = method;
    for (std::size_t ch = 0; ch < z.n_channels; ++ch) {
        if (is_blocked[ch]) a.blocked.push_back(ch);
    }

    const std::size_t nw = effective_workers(z.n_images, workers);
    std::vector<std::vector<std::uint32_t>> partial(nw, std::vector<std::uint32_t>(n_classes * z.n_channels, 0));
    parallel_chunks(z.n_images, nw, [&](std::size_t w, std::size_t begin, std::size_t end) {
        std::vector<float> row(z.n_channels);
        auto& counts = partial[w];
        for (std::size_t i = begin; i < end; ++i) {
            const auto src = z.row(i);
            for (std::size_t ch = 0; ch < z.n_channels; ++ch) {
                row[ch] = is_blocked[ch] ? -std::numeric_limits<float>::infinity() : src[ch];
            }
            const std::size_t c = static_cast<std::size_t>(labels[i]);
            for (auto ch : select_channels(row, method)) {
                ++counts[c * z.n_channels + ch];
            }
        }
    });

    a.counts.assign(n_classes * z.n_channels, 0);
    for (const auto& counts : partial) {
        for (std::size_t k = 0; k < counts.size(); ++k) a.counts[k] += counts[k];
    }
    return a;
}

}  // namespace attrigraph
