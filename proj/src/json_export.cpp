#include "attrigraph/json_export.hpp"

#include <algorithm>

#include "attrigraph/error.hpp"

namespace attrigraph {

namespace {

void require_schema(const json& doc, const char* kind) {
    if (!doc.is_object() || doc.value("schema", 0) != kSchemaVersion) {
        throw FormatError(std::string(kind) + ": missing or unsupported \"schema\" field");
    }
    if (doc.value("kind", std::string()) != kind) {
        throw FormatError(std::string("expected a ") + kind + " document, got kind '" +
                          doc.value("kind", std::string()) + "'");
    }
}

template <class F>
auto parse_guard(const char* kind, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw FormatError(std::string(kind) + ": " + e.what());
    }
}

std::size_t layer_index(const std::vector<std::string>& names, const std::string& name) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
        throw FormatError("attribution graph references unknown layer '" + name + "'");
    }
    return static_cast<std::size_t>(it - names.begin());
}

}  // namespace

std::string dump_json(const json& doc) { return doc.dump(2) + "\n"; }

json to_json(const SelectionMethod& method) {
    if (method.kind == SelectionMethod::Kind::top_k) {
        return {{"name", "top_k"}, {"k", method.k}};
    }
    return {{"name", "cumulative_share"}, {"fraction", method.fraction}};
}

SelectionMethod selection_method_from_json(const json& doc) {
    return parse_guard("selection method", [&] {
        const auto name = doc.at("name").get<std::string>();
        if (name == "top_k") return SelectionMethod::top(doc.at("k").get<std::size_t>());
        if (name == "cumulative_share") return SelectionMethod::share(doc.at("fraction").get<double>());
        throw FormatError("unknown selection method '" + name + "'");
    });
}

json to_json(const AggregatedActivations& a) {
    json counts = json::array();
    for (std::size_t c = 0; c < a.n_classes; ++c) {
        const auto row = a.row(c);
        counts.push_back(std::vector<std::uint32_t>(row.begin(), row.end()));
    }
    return {{"schema", kSchemaVersion},
            {"kind", "aggregated_activations"},
            {"layer", a.layer},
            {"n_classes", a.n_classes},
            {"n_channels", a.n_channels},
            {"method", to_json(a.method)},
            {"blocked", a.blocked},
            {"counts", std::move(counts)}};
}

AggregatedActivations activations_from_json(const json& doc) {
    require_schema(doc, "aggregated_activations");
    return parse_guard("aggregated_activations", [&] {
        AggregatedActivations a;
        a.layer = doc.at("layer").get<std::string>();
        a.n_classes = doc.at("n_classes").get<std::size_t>();
        a.n_channels = doc.at("n_channels").get<std::size_t>();
        a.method = selection_method_from_json(doc.at("method"));
        a.blocked = doc.at("blocked").get<std::vector<std::size_t>>();
        const auto& counts = doc.at("counts");
        if (counts.size() != a.n_classes) {
            throw FormatError("aggregated_activations: " + std::to_string(counts.size()) + " rows for " +
                              std::to_string(a.n_classes) + " classes");
        }
        for (const auto& row : counts) {
            auto values = row.get<std::vector<std::uint32_t>>();
            if (values.size() != a.n_channels) {
                throw FormatError("aggregated_activations: row of " + std::to_string(values.size()) +
                                  " counts for " + std::to_string(a.n_channels) + " channels");
            }
            a.counts.insert(a.counts.end(), values.begin(), values.end());
        }
        return a;
    });
}

json to_json(const AggregatedInfluences& inf) {
    json triplets = json::array();
    for (std::size_t c = 0; c < inf.n_classes; ++c) {
        for (std::size_t i = 0; i < inf.prev_channels; ++i) {
            for (std::size_t j = 0; j < inf.cur_channels; ++j) {
                if (const auto n = inf.at(c, i, j); n > 0) {
                    triplets.push_back({c, i, j, n});
                }
            }
        }
    }
    return {{"schema", kSchemaVersion},
            {"kind", "aggregated_influences"},
            {"layer", inf.layer},
            {"prev_layer", inf.prev_layer},
            {"n_classes", inf.n_classes},
            {"prev_channels", inf.prev_channels},
            {"channels", inf.cur_channels},
            {"k", inf.k},
            {"blocked_prev", inf.blocked_prev},
            {"blocked", inf.blocked_cur},
            {"triplets", std::move(triplets)}};
}

AggregatedInfluences influences_from_json(const json& doc) {
    require_schema(doc, "aggregated_influences");
    return parse_guard("aggregated_influences", [&] {
        AggregatedInfluences inf;
        inf.layer = doc.at("layer").get<std::string>();
        inf.prev_layer = doc.at("prev_layer").get<std::string>();
        inf.n_classes = doc.at("n_classes").get<std::size_t>();
        inf.prev_channels = doc.at("prev_channels").get<std::size_t>();
        inf.cur_channels = doc.at("channels").get<std::size_t>();
        inf.k = doc.at("k").get<std::size_t>();
        inf.blocked_prev = doc.at("blocked_prev").get<std::vector<std::size_t>>();
        inf.blocked_cur = doc.at("blocked").get<std::vector<std::size_t>>();
        inf.counts.assign(inf.n_classes * inf.prev_channels * inf.cur_channels, 0);
        for (const auto& t : doc.at("triplets")) {
            const auto c = t.at(0).get<std::size_t>();
            const auto i = t.at(1).get<std::size_t>();
            const auto j = t.at(2).get<std::size_t>();
            if (c >= inf.n_classes || i >= inf.prev_channels || j >= inf.cur_channels) {
                throw FormatError("aggregated_influences: triplet (" + std::to_string(c) + ", " + std::to_string(i) +
                                  ", " + std::to_string(j) + ") out of range");
            }
            inf.counts[inf.index(c, i, j)] = t.at(3).get<std::uint32_t>();
        }
        return inf;
    });
}

json to_json(const AttributionGraph& g) {
    json vertices = json::array();
    for (const auto& v : g.vertices) {
        vertices.push_back({{"layer", g.layer_names.at(v.layer)},
                            {"channel", v.channel},
                            {"pagerank", v.pagerank},
                            {"activation_count", v.activation_count}});
    }
    json edges = json::array();
    for (const auto& e : g.edges) {
        edges.push_back({{"from", {{"layer", g.layer_names.at(e.from_layer)}, {"channel", e.from_channel}}},
                         {"to", {{"layer", g.layer_names.at(e.to_layer)}, {"channel", e.to_channel}}},
                         {"influence_count", e.influence_count}});
    }
    return {{"schema", kSchemaVersion},
            {"kind", "attribution_graph"},
            {"class", g.class_id},
            {"name", g.class_name},
            {"layers", g.layer_names},
            {"params",
             {{"extraction_share", g.params.extraction_share},
              {"damping", g.params.damping},
              {"iterations", g.params.iterations},
              {"walk", g.params.directed ? "directed" : "undirected"}}},
            {"vertices", std::move(vertices)},
            {"edges", std::move(edges)}};
}

AttributionGraph attribution_graph_from_json(const json& doc) {
    require_schema(doc, "attribution_graph");
    return parse_guard("attribution_graph", [&] {
        AttributionGraph g;
        g.class_id = doc.at("class").get<std::size_t>();
        g.class_name = doc.at("name").get<std::string>();
        g.layer_names = doc.at("layers").get<std::vector<std::string>>();
        const auto& p = doc.at("params");
        g.params.extraction_share = p.at("extraction_share").get<double>();
        g.params.damping = p.at("damping").get<double>();
        g.params.iterations = p.at("iterations").get<std::size_t>();
        g.params.directed = p.at("walk").get<std::string>() == "directed";
        for (const auto& v : doc.at("vertices")) {
            g.vertices.push_back({layer_index(g.layer_names, v.at("layer").get<std::string>()),
                                  v.at("channel").get<std::size_t>(), v.at("pagerank").get<double>(),
                                  v.at("activation_count").get<std::uint32_t>()});
        }
        for (const auto& e : doc.at("edges")) {
            const auto& from = e.at("from");
            const auto& to = e.at("to");
            g.edges.push_back({layer_index(g.layer_names, from.at("layer").get<std::string>()),
                               from.at("channel").get<std::size_t>(),
                               layer_index(g.layer_names, to.at("layer").get<std::string>()),
                               to.at("channel").get<std::size_t>(), e.at("influence_count").get<std::uint32_t>()});
        }
        return g;
    });
}

json summaries_to_json(std::span<const ClassSummary> summaries) {
    json classes = json::array();
    for (const auto& s : summaries) {
        classes.push_back({{"id", s.class_id},
                           {"name", s.name},
                           {"top1_accuracy", s.top1_accuracy},
                           {"histogram", s.histogram},
                           {"image_count", s.image_count}});
    }
    return {{"schema", kSchemaVersion}, {"kind", "class_summaries"}, {"classes", std::move(classes)}};
}

std::vector<ClassSummary> summaries_from_json(const json& doc) {
    require_schema(doc, "class_summaries");
    return parse_guard("class_summaries", [&] {
        std::vector<ClassSummary> out;
        for (const auto& jc : doc.at("classes")) {
            ClassSummary s;
            s.class_id = jc.at("id").get<std::size_t>();
            s.name = jc.at("name").get<std::string>();
            s.top1_accuracy = jc.at("top1_accuracy").get<double>();
            const auto hist = jc.at("histogram").get<std::vector<std::uint32_t>>();
            if (hist.size() != kHistogramBins) {
                throw FormatError("class_summaries: histogram with " + std::to_string(hist.size()) + " bins");
            }
            std::copy(hist.begin(), hist.end(), s.histogram.begin());
            s.image_count = jc.at("image_count").get<std::size_t>();
            out.push_back(std::move(s));
        }
        return out;
    });
}

json embedding_to_json(const ClassEmbedding& e, std::span<const std::string> class_names) {
    json points = json::array();
    for (std::size_t c = 0; c < e.points.size(); ++c) {
        points.push_back({{"class", c},
                          {"name", c < class_names.size() ? class_names[c] : std::string()},
                          {"x", e.points[c][0]},
                          {"y", e.points[c][1]}});
    }
    return {{"schema", kSchemaVersion},
            {"kind", "class_embedding"},
            {"layer", e.layer},
            {"method", e.method},
            {"points", std::move(points)}};
}

json similarity_to_json(std::span<const AggregatedActivations> layers, const std::string& default_layer) {
    json per_layer = json::object();
    for (const auto& a : layers) {
        const auto sim = similarity_matrix(a);
        json matrix = json::array();
        json rankings = json::array();
        for (std::size_t c = 0; c < a.n_classes; ++c) {
            matrix.push_back(std::vector<double>(sim.begin() + static_cast<std::ptrdiff_t>(c * a.n_classes),
                                                 sim.begin() + static_cast<std::ptrdiff_t>((c + 1) * a.n_classes)));
            rankings.push_back(rank_classes(a, c));
        }
        per_layer[a.layer] = {{"matrix", std::move(matrix)}, {"rankings", std::move(rankings)}};
    }
    return {{"schema", kSchemaVersion},
            {"kind", "class_similarity"},
            {"default_layer", default_layer},
            {"layers", std::move(per_layer)}};
}

json examples_to_json(const ChannelMaxMatrix& z, std::span<const std::string> image_files) {
    json channels = json::array();
    for (std::size_t ch = 0; ch < z.n_channels; ++ch) {
        json list = json::array();
        for (int id : top_examples(z, ch, std::max<std::size_t>(z.n_images, 1))) {
            const auto row = static_cast<std::size_t>(
                std::find(z.image_ids.begin(), z.image_ids.end(), id) - z.image_ids.begin());
            json item = {{"image_id", id}, {"value", z.at(row, ch)}};
            if (row < image_files.size()) item["file"] = image_files[row];
            list.push_back(std::move(item));
        }
        channels.push_back(std::move(list));
    }
    return {{"schema", kSchemaVersion},
            {"kind", "channel_examples"},
            {"layer", z.layer},
            {"channels", std::move(channels)}};
}

}  // namespace attrigraph
