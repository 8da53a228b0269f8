#pragma once

// JSON documents of the export bundle. Every document carries "schema": 1.
// Objects are emitted with sorted keys and doubles in shortest round-trip
// form, so identical inputs always produce identical bytes.

#include <span>
#include <string>
#include <vector>

#include "attrigraph/activation_agg.hpp"
#include "attrigraph/class_analytics.hpp"
#include "attrigraph/graph_build.hpp"
#include "attrigraph/influence_agg.hpp"
#include "json.hpp"

namespace attrigraph {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Two-space indented text with a trailing newline.
std::string dump_json(const json& doc);

json to_json(const SelectionMethod& method);
SelectionMethod selection_method_from_json(const json& doc);

json to_json(const AggregatedActivations& a);
AggregatedActivations activations_from_json(const json& doc);

/// Sparse (class, i, j, count) triplets of the nonzero counts.
json to_json(const AggregatedInfluences& inf);
AggregatedInfluences influences_from_json(const json& doc);

json to_json(const AttributionGraph& g);
AttributionGraph attribution_graph_from_json(const json& doc);

json summaries_to_json(std::span<const ClassSummary> summaries);
std::vector<ClassSummary> summaries_from_json(const json& doc);

json embedding_to_json(const ClassEmbedding& e, std::span<const std::string> class_names);

/// Per layer: the similarity matrix and, for every class, the ranked class list.
json similarity_to_json(std::span<const AggregatedActivations> layers, const std::string& default_layer);

/// Per channel: every image id with its Z value, best first.
json examples_to_json(const ChannelMaxMatrix& z, std::span<const std::string> image_files);

}  // namespace attrigraph
