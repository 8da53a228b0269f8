#include "attrigraph/graph_build.hpp"

#include <algorithm>
#include <tuple>

#include "attrigraph/error.hpp"
#include "attrigraph/selection.hpp"

namespace attrigraph {

std::size_t FullNetworkGraph::layer_of(std::size_t v) const {
    const auto it = std::upper_bound(layer_offsets.begin(), layer_offsets.end(), v);
    return static_cast<std::size_t>(it - layer_offsets.begin()) - 1;
}

FullNetworkGraph build_full_graph(std::span<const AggregatedActivations> activations,
                                  std::span<const AggregatedInfluences> influences, std::size_t class_id) {
    if (activations.empty()) {
        throw Error(ErrorKind::invalid_argument, "build_full_graph: no layers");
    }
    if (influences.size() + 1 != activations.size()) {
        throw Error(ErrorKind::shape_mismatch, "build_full_graph: " + std::to_string(activations.size()) +
                                                   " activation layers need " +
                                                   std::to_string(activations.size() - 1) + " influence layers, got " +
                                                   std::to_string(influences.size()));
    }
    for (const auto& a : activations) {
        if (class_id >= a.n_classes) {
            throw Error(ErrorKind::index_out_of_range, "class " + std::to_string(class_id) + " outside layer '" +
                                                           a.layer + "' with " + std::to_string(a.n_classes) +
                                                           " classes");
        }
    }
    for (std::size_t k = 0; k < influences.size(); ++k) {
        const auto& inf = influences[k];
        const auto& prev = activations[k];
        const auto& cur = activations[k + 1];
        if (inf.prev_layer != prev.layer || inf.layer != cur.layer || inf.prev_channels != prev.n_channels ||
            inf.cur_channels != cur.n_channels || class_id >= inf.n_classes) {
            throw Error(ErrorKind::shape_mismatch,
                        "influences '" + inf.prev_layer + "' -> '" + inf.layer + "' (" +
                            std::to_string(inf.prev_channels) + "x" + std::to_string(inf.cur_channels) +
                            ") do not line up with activation layers '" + prev.layer + "' (" +
                            std::to_string(prev.n_channels) + ") and '" + cur.layer + "' (" +
                            std::to_string(cur.n_channels) + ")");
        }
    }

    FullNetworkGraph g;
    g.class_id = class_id;
    g.layer_offsets.push_back(0);
    for (const auto& a : activations) {
        g.layer_names.push_back(a.layer);
        g.layer_offsets.push_back(g.layer_offsets.back() + a.n_channels);
    }
    g.personalization.assign(g.n_vertices(), 0.0);
    g.activation_counts.assign(g.n_vertices(), 0);
    for (std::size_t l = 0; l < activations.size(); ++l) {
        const auto row = activations[l].row(class_id);
        const std::uint32_t top = row.empty() ? 0 : *std::max_element(row.begin(), row.end());
        for (std::size_t j = 0; j < row.size(); ++j) {
            g.activation_counts[g.vertex(l, j)] = row[j];
            if (top > 0) {
                g.personalization[g.vertex(l, j)] = static_cast<double>(row[j]) / static_cast<double>(top);
            }
        }
    }
    for (std::size_t k = 0; k < influences.size(); ++k) {
        const auto& inf = influences[k];
        for (std::size_t i = 0; i < inf.prev_channels; ++i) {
            for (std::size_t j = 0; j < inf.cur_channels; ++j) {
                const auto w = inf.at(class_id, i, j);
                if (w > 0) g.edges.push_back({g.vertex(k, i), g.vertex(k + 1, j), w});
            }
        }
    }
    return g;
}

std::vector<double> personalized_pagerank(const FullNetworkGraph& graph, const PageRankOptions& options) {
    const std::size_t n = graph.n_vertices();
    if (!(options.damping > 0.0 && options.damping < 1.0)) {
        throw Error(ErrorKind::invalid_argument, "pagerank damping must lie in (0, 1)");
    }
    if (options.iterations == 0) {
        throw Error(ErrorKind::invalid_argument, "pagerank needs at least one iteration");
    }
    if (graph.personalization.size() != n) {
        throw Error(ErrorKind::shape_mismatch, "personalization has " +
                                                   std::to_string(graph.personalization.size()) +
                                                   " entries for " + std::to_string(n) + " vertices");
    }
    double pers_total = 0.0;
    for (double p : graph.personalization) {
        if (p < 0.0) throw Error(ErrorKind::invalid_argument, "negative personalization");
        pers_total += p;
    }
    if (!(pers_total > 0.0)) {
        throw Error(ErrorKind::invalid_argument,
                    "class " + std::to_string(graph.class_id) + " has an all-zero personalization vector");
    }
    std::vector<double> teleport(n);
    for (std::size_t v = 0; v < n; ++v) teleport[v] = graph.personalization[v] / pers_total;

    // Outgoing adjacency in CSR form, arcs kept in edge-list order.
    std::vector<std::size_t> start(n + 1, 0);
    for (const auto& e : graph.edges) {
        if (e.from >= n || e.to >= n) {
            throw Error(ErrorKind::index_out_of_range, "edge endpoint outside " + std::to_string(n) + " vertices");
        }
        ++start[e.from + 1];
        if (!options.directed) ++start[e.to + 1];
    }
    for (std::size_t v = 0; v < n; ++v) start[v + 1] += start[v];
    std::vector<std::size_t> target(start.back());
    std::vector<double> weight(start.back());
    std::vector<double> out_weight(n, 0.0);
    {
        std::vector<std::size_t> fill(start.begin(), start.end() - 1);
        auto add_arc = [&](std::size_t u, std::size_t v, double w) {
            target[fill[u]] = v;
            weight[fill[u]] = w;
            ++fill[u];
            out_weight[u] += w;
        };
        for (const auto& e : graph.edges) {
            add_arc(e.from, e.to, e.weight);
            if (!options.directed) add_arc(e.to, e.from, e.weight);
        }
    }

    const double d = options.damping;
    std::vector<double> x(n, 1.0 / static_cast<double>(n));
    std::vector<double> next(n);
    for (std::size_t it = 0; it < options.iterations; ++it) {
        double dangling = 0.0;
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t u = 0; u < n; ++u) {
            if (out_weight[u] == 0.0) {
                dangling += x[u];
                continue;
            }
            for (std::size_t a = start[u]; a < start[u + 1]; ++a) {
                next[target[a]] += d * x[u] * (weight[a] / out_weight[u]);
            }
        }
        const double spread = d * dangling + (1.0 - d);
        for (std::size_t v = 0; v < n; ++v) next[v] += spread * teleport[v];
        x.swap(next);
    }
    return x;
}

bool AttributionGraph::contains(std::size_t layer, std::size_t channel) const {
    return std::any_of(vertices.begin(), vertices.end(),
                       [&](const Vertex& v) { return v.layer == layer && v.channel == channel; });
}

AttributionGraph extract_attribution_graph(const FullNetworkGraph& graph, std::span<const double> scores,
                                           double share) {
    if (!(share > 0.0 && share < 1.0)) {
        throw Error(ErrorKind::invalid_argument, "extraction share " + std::to_string(share) + " outside (0, 1)");
    }
    if (scores.size() != graph.n_vertices()) {
        throw Error(ErrorKind::shape_mismatch, std::to_string(scores.size()) + " scores for " +
                                                   std::to_string(graph.n_vertices()) + " vertices");
    }

    AttributionGraph out;
    out.class_id = graph.class_id;
    out.layer_names = graph.layer_names;
    out.params.extraction_share = share;

    std::vector<bool> kept(graph.n_vertices(), false);
    for (std::size_t l = 0; l < graph.n_layers(); ++l) {
        const auto layer_scores = scores.subspan(graph.layer_offsets[l], graph.layer_size(l));
        auto chosen = cumulative_share_prefix(layer_scores, share);
        std::sort(chosen.begin(), chosen.end());
        for (auto ch : chosen) {
            const auto v = graph.vertex(l, ch);
            kept[v] = true;
            out.vertices.push_back({l, ch, scores[v], graph.activation_counts[v]});
        }
    }
    for (const auto& e : graph.edges) {
        if (kept[e.from] && kept[e.to]) {
            out.edges.push_back({graph.layer_of(e.from), graph.channel_of(e.from), graph.layer_of(e.to),
                                 graph.channel_of(e.to), e.weight});
        }
    }
    std::sort(out.edges.begin(), out.edges.end(), [](const auto& a, const auto& b) {
        return std::tie(a.from_layer, a.from_channel, a.to_layer, a.to_channel) <
               std::tie(b.from_layer, b.from_channel, b.to_layer, b.to_channel);
    });
    return out;
}

AttributionGraph attribution_graph_for_class(std::span<const AggregatedActivations> activations,
                                             std::span<const AggregatedInfluences> influences,
                                             std::size_t class_id, const AttributionGraph::Params& params) {
    const auto graph = build_full_graph(activations, influences, class_id);
    const auto scores = personalized_pagerank(graph, {params.damping, params.iterations, params.directed});
    auto out = extract_attribution_graph(graph, scores, params.extraction_share);
    out.params = params;
    return out;
}

}  // namespace attrigraph
