#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "attrigraph/activation_agg.hpp"
#include "attrigraph/influence_agg.hpp"

namespace attrigraph {

inline constexpr double kDefaultDamping = 0.85;
inline constexpr std::size_t kDefaultPageRankIterations = 100;
inline constexpr double kDefaultExtractionShare = 0.075;

/// Whole-network graph for one class. Vertex ids are dense:
/// id = layer_offsets[layer] + channel.
struct FullNetworkGraph {
    struct Edge {
        std::size_t from = 0;  // vertex in layer l - 1
        std::size_t to = 0;    // vertex in layer l
        std::uint32_t weight = 0;
    };

    std::size_t class_id = 0;
    std::vector<std::string> layer_names;
    std::vector<std::size_t> layer_offsets;  // layer_names.size() + 1 entries
    std::vector<double> personalization;     // per vertex, in [0, 1]
    std::vector<std::uint32_t> activation_counts;
    std::vector<Edge> edges;

    std::size_t n_vertices() const { return layer_offsets.empty() ? 0 : layer_offsets.back(); }
    std::size_t n_layers() const { return layer_names.size(); }
    std::size_t layer_size(std::size_t l) const { return layer_offsets[l + 1] - layer_offsets[l]; }
    std::size_t vertex(std::size_t layer, std::size_t channel) const { return layer_offsets[layer] + channel; }
    std::size_t layer_of(std::size_t v) const;
    std::size_t channel_of(std::size_t v) const { return v - layer_offsets[layer_of(v)]; }
};

/// `influences[k]` connects `activations[k]` to `activations[k + 1]`.
/// Personalization is A[c] divided by the layer's maximum (all zero for an
/// all-zero layer); every I[c][i][j] > 0 becomes an edge.
FullNetworkGraph build_full_graph(std::span<const AggregatedActivations> activations,
                                  std::span<const AggregatedInfluences> influences, std::size_t class_id);

struct PageRankOptions {
    double damping = kDefaultDamping;
    std::size_t iterations = kDefaultPageRankIterations;
    /// false: every edge is walkable in both directions.
    bool directed = false;
};

/// Power iteration from the uniform vector for exactly `iterations` sweeps.
/// Teleport goes to the normalised personalization; mass sitting on
/// vertices without outgoing weight is redistributed the same way.
std::vector<double> personalized_pagerank(const FullNetworkGraph& graph, const PageRankOptions& options = {});

struct AttributionGraph {
    struct Vertex {
        std::size_t layer = 0;
        std::size_t channel = 0;
        double pagerank = 0.0;
        std::uint32_t activation_count = 0;

        friend bool operator==(const Vertex&, const Vertex&) = default;
    };
    struct Edge {
        std::size_t from_layer = 0;
        std::size_t from_channel = 0;
        std::size_t to_layer = 0;
        std::size_t to_channel = 0;
        std::uint32_t influence_count = 0;

        friend bool operator==(const Edge&, const Edge&) = default;
    };
    struct Params {
        double extraction_share = kDefaultExtractionShare;
        double damping = kDefaultDamping;
        std::size_t iterations = kDefaultPageRankIterations;
        bool directed = false;

        friend bool operator==(const Params&, const Params&) = default;
    };

    std::size_t class_id = 0;
    std::string class_name;
    std::vector<std::string> layer_names;
    std::vector<Vertex> vertices;  // by layer, then channel
    std::vector<Edge> edges;       // by (from, to)
    Params params;

    bool contains(std::size_t layer, std::size_t channel) const;

    friend bool operator==(const AttributionGraph&, const AttributionGraph&) = default;
};

/// Keeps, per layer, the shortest descending-score prefix whose share of
/// that layer's score mass reaches `share` (crossing vertex included), then
/// the edges between kept vertices.
AttributionGraph extract_attribution_graph(const FullNetworkGraph& graph, std::span<const double> scores,
                                           double share = kDefaultExtractionShare);

/// build_full_graph -> personalized_pagerank -> extract_attribution_graph.
AttributionGraph attribution_graph_for_class(std::span<const AggregatedActivations> activations,
                                             std::span<const AggregatedInfluences> influences,
                                             std::size_t class_id, const AttributionGraph::Params& params);

}  // namespace attrigraph
