#include "attrigraph/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <set>

#include "attrigraph/class_analytics.hpp"
#include "attrigraph/error.hpp"
#include "attrigraph/io_formats.hpp"
#include "attrigraph/json_export.hpp"
#include "attrigraph/parallel.hpp"

namespace attrigraph {

namespace fs = std::filesystem;

namespace bundle_paths {
std::string activations(const std::string& layer) { return "aggregates/A_" + layer + ".json"; }
std::string influences(const std::string& layer) { return "aggregates/I_" + layer + ".json"; }
std::string graph(std::size_t class_id) { return "graphs/class_" + std::to_string(class_id) + ".json"; }
std::string embedding(const std::string& layer) { return "analytics/embedding_" + layer + ".json"; }
std::string examples(const std::string& layer) { return "analytics/examples_" + layer + ".json"; }
}  // namespace bundle_paths

fs::path PipelineConfig::resolved_weights_dir() const {
    return weights_dir.empty() ? model_manifest.parent_path() / "weights" : weights_dir;
}

void PipelineConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::invalid_argument, "config: " + what); };
    if (model_manifest.empty()) fail("no model manifest");
    if (dataset_manifest.empty()) fail("no dataset manifest");
    if (output_dir.empty()) fail("no output directory");
    if (k_m1 < 1) fail("k_m1 must be at least 1");
    if (!(k_m2_activation > 0.0 && k_m2_activation < 1.0)) fail("k_m2_activation must lie in (0, 1)");
    if (!(k_m2_extraction > 0.0 && k_m2_extraction < 1.0)) fail("k_m2_extraction must lie in (0, 1)");
    if (pagerank_iterations < 1) fail("pagerank_iterations must be at least 1");
    if (!(damping > 0.0 && damping < 1.0)) fail("damping must lie in (0, 1)");
    if (workers < 1) fail("workers must be at least 1");
}

PipelineConfig config_from_json(const nlohmann::json& doc, const fs::path& base_dir) {
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; };
    PipelineConfig c;
    try {
        if (doc.contains("model")) c.model_manifest = resolve(doc.at("model").get<std::string>());
        if (doc.contains("weights_dir")) c.weights_dir = resolve(doc.at("weights_dir").get<std::string>());
        if (doc.contains("dataset")) c.dataset_manifest = resolve(doc.at("dataset").get<std::string>());
        if (doc.contains("output")) c.output_dir = resolve(doc.at("output").get<std::string>());
        c.k_m1 = doc.value("k_m1", c.k_m1);
        c.k_m2_activation = doc.value("k_m2_activation", c.k_m2_activation);
        c.k_m2_extraction = doc.value("k_m2_extraction", c.k_m2_extraction);
        c.pagerank_iterations = doc.value("pagerank_iterations", c.pagerank_iterations);
        c.damping = doc.value("damping", c.damping);
        c.workers = doc.value("workers", c.workers);
        const auto walk = doc.value("walk", std::string("undirected"));
        if (walk != "undirected" && walk != "directed") {
            throw Error(ErrorKind::invalid_argument, "config: walk must be \"undirected\" or \"directed\"");
        }
        c.directed_walk = walk == "directed";
        if (doc.contains("blocklist")) {
            for (const auto& b : doc.at("blocklist")) {
                c.blocklist.push_back({b.at("layer").get<std::string>(), b.at("channel").get<std::size_t>()});
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
    return c;
}

PipelineConfig load_config(const fs::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return config_from_json(doc, path.parent_path());
}

void apply_env_overrides(PipelineConfig& config) {
    if (const char* env = std::getenv("ATTRIGRAPH_WORKERS"); env && *env) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (*end != '\0' || n < 1) {
            throw Error(ErrorKind::invalid_argument,
                        std::string("ATTRIGRAPH_WORKERS must be a positive integer, got '") + env + "'");
        }
        config.workers = static_cast<std::size_t>(n);
    }
}

std::vector<TracedImage> trace_corpus(const ModelManifest& model, const Dataset& dataset, std::size_t workers) {
    std::vector<TracedImage> traced(dataset.images.size());
    parallel_chunks(dataset.images.size(), workers, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto& img = dataset.images[i];
            try {
                traced[i] = {img.id, img.label, forward(model, img.pixels)};
            } catch (const Error& e) {
                throw Error(e.kind(), "image " + std::to_string(img.id) + ": " + e.what());
            }
        }
    });
    return traced;
}

std::vector<std::size_t> blocked_channels(const PipelineConfig& config, const ModelManifest& model,
                                          std::size_t layer) {
    std::set<std::size_t> out;
    for (const auto& b : config.blocklist) {
        const auto idx = model.layer_index(b.layer);
        if (!idx) {
            throw Error(ErrorKind::invalid_argument, "blocklist names unknown layer '" + b.layer + "'");
        }
        if (b.channel >= model.layers[*idx].out_channels()) {
            throw Error(ErrorKind::index_out_of_range, "blocklist channel " + std::to_string(b.channel) +
                                                           " outside layer '" + b.layer + "'");
        }
        if (*idx == layer) out.insert(b.channel);
    }
    return {out.begin(), out.end()};
}

namespace {

class StageRunner {
public:
    StageRunner(std::ostream* log, std::vector<StageTiming>* timings) : log_(log), timings_(timings) {}

    template <class F>
    auto operator()(const std::string& stage, F&& f) {
        current_ = stage;
        const auto t0 = std::chrono::steady_clock::now();
        auto finish = [&] {
            const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (timings_) timings_->push_back({stage, s});
            if (log_) *log_ << "[attrigraph] " << std::left << std::setw(16) << stage << std::fixed
                            << std::setprecision(3) << s << " s\n";
        };
        try {
            if constexpr (std::is_void_v<decltype(f())>) {
                f();
                finish();
            } else {
                auto r = f();
                finish();
                return r;
            }
        } catch (const FormatError& e) {
            throw FormatError("stage '" + stage + "': " + e.what(), e.offset());
        } catch (const Error& e) {
            throw Error(e.kind(), "stage '" + stage + "': " + e.what());
        } catch (const std::exception& e) {
            throw Error(ErrorKind::io, "stage '" + stage + "': " + e.what());
        }
    }

    const std::string& current() const { return current_; }

private:
    std::ostream* log_;
    std::vector<StageTiming>* timings_;
    std::string current_;
};

struct Inputs {
    ModelManifest model;
    Dataset dataset;
};

Inputs load_inputs(const PipelineConfig& config) {
    Inputs in{load_model(config.model_manifest, config.resolved_weights_dir()), load_dataset(config.dataset_manifest)};
    if (in.dataset.n_classes() != in.model.n_classes()) {
        throw Error(ErrorKind::shape_mismatch, "dataset has " + std::to_string(in.dataset.n_classes()) +
                                                   " classes, model head predicts " +
                                                   std::to_string(in.model.n_classes()));
    }
    // Validate the blocklist up front.
    for (std::size_t l = 0; l < in.model.layers.size(); ++l) blocked_channels(config, in.model, l);
    return in;
}

std::vector<ChannelMaxMatrix> channel_max_all(const ModelManifest& model, std::span<const TracedImage> traced) {
    std::vector<ChannelMaxMatrix> zs;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        zs.push_back(build_channel_max(traced, l, model.layers[l].name));
    }
    return zs;
}

std::vector<AggregatedActivations> activations_all(const PipelineConfig& config, const Inputs& in,
                                                   std::span<const ChannelMaxMatrix> zs) {
    const auto labels = in.dataset.labels();
    std::vector<AggregatedActivations> out;
    for (std::size_t l = 0; l < zs.size(); ++l) {
        const auto blocked = blocked_channels(config, in.model, l);
        out.push_back(aggregate_activations(zs[l], labels, in.dataset.n_classes(),
                                            SelectionMethod::share(config.k_m2_activation), blocked, config.workers));
    }
    return out;
}

std::vector<AggregatedInfluences> influences_all(const PipelineConfig& config, const Inputs& in,
                                                 std::span<const TracedImage> traced) {
    std::vector<AggregatedInfluences> out;
    for (std::size_t l = 1; l < in.model.layers.size(); ++l) {
        const auto prev = blocked_channels(config, in.model, l - 1);
        const auto cur = blocked_channels(config, in.model, l);
        out.push_back(aggregate_influences(traced, in.model, l, in.dataset.n_classes(), config.k_m1, prev, cur,
                                           config.workers));
    }
    return out;
}

AttributionGraph::Params graph_params(const PipelineConfig& config) {
    return {config.k_m2_extraction, config.damping, config.pagerank_iterations, config.directed_walk};
}

std::vector<AttributionGraph> graphs_for(const PipelineConfig& config, std::span<const AggregatedActivations> a,
                                         std::span<const AggregatedInfluences> inf,
                                         const std::vector<std::string>& class_names,
                                         const std::vector<std::size_t>& classes) {
    std::vector<AttributionGraph> out(classes.size());
    const auto params = graph_params(config);
    parallel_chunks(classes.size(), config.workers, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t n = begin; n < end; ++n) {
            const auto c = classes[n];
            try {
                out[n] = attribution_graph_for_class(a, inf, c, params);
            } catch (const Error& e) {
                throw Error(e.kind(), "class " + std::to_string(c) + ": " + e.what());
            }
            out[n].class_name = c < class_names.size() ? class_names[c] : std::string();
        }
    });
    return out;
}

void write_activations(const fs::path& root, std::span<const AggregatedActivations> a) {
    for (const auto& x : a) write_text_file(root / bundle_paths::activations(x.layer), dump_json(to_json(x)));
}

void write_influences(const fs::path& root, std::span<const AggregatedInfluences> inf) {
    for (const auto& x : inf) write_text_file(root / bundle_paths::influences(x.layer), dump_json(to_json(x)));
}

void write_graphs(const fs::path& root, std::span<const AttributionGraph> graphs) {
    for (const auto& g : graphs) write_text_file(root / bundle_paths::graph(g.class_id), dump_json(to_json(g)));
}

void write_analytics(const fs::path& root, const Inputs& in, std::span<const TracedImage> traced,
                     std::span<const AggregatedActivations> a, std::span<const ChannelMaxMatrix> zs) {
    const auto& names = in.dataset.class_names;
    write_text_file(root / bundle_paths::kSummaries,
                    dump_json(summaries_to_json(class_summaries(traced, names))));
    write_text_file(root / bundle_paths::kSimilarity, dump_json(similarity_to_json(a, in.model.layers.back().name)));
    for (const auto& e : embed_classes(a)) {
        write_text_file(root / bundle_paths::embedding(e.layer), dump_json(embedding_to_json(e, names)));
    }
    std::vector<std::string> files;
    for (const auto& img : in.dataset.images) files.push_back(img.file);
    for (const auto& z : zs) {
        write_text_file(root / bundle_paths::examples(z.layer), dump_json(examples_to_json(z, files)));
    }
}

void write_index(const fs::path& root, const PipelineConfig& config, const Inputs& in) {
    json layers = json::array();
    json files = json::array({bundle_paths::kModel, bundle_paths::kDataset, bundle_paths::kSummaries,
                              bundle_paths::kSimilarity});
    for (std::size_t l = 0; l < in.model.layers.size(); ++l) {
        const auto& name = in.model.layers[l].name;
        layers.push_back({{"name", name}, {"channels", in.model.layers[l].out_channels()}});
        files.push_back(bundle_paths::activations(name));
        if (l > 0) files.push_back(bundle_paths::influences(name));
        files.push_back(bundle_paths::embedding(name));
        files.push_back(bundle_paths::examples(name));
    }
    for (std::size_t c = 0; c < in.dataset.n_classes(); ++c) files.push_back(bundle_paths::graph(c));

    json blocklist = json::array();
    for (const auto& b : config.blocklist) blocklist.push_back({{"layer", b.layer}, {"channel", b.channel}});

    const json doc = {{"schema", kSchemaVersion},
                      {"kind", "bundle"},
                      {"model", in.model.name},
                      {"dataset", in.dataset.name},
                      {"n_classes", in.dataset.n_classes()},
                      {"n_images", in.dataset.images.size()},
                      {"classes", in.dataset.class_names},
                      {"layers", std::move(layers)},
                      {"default_layer", in.model.layers.back().name},
                      {"params",
                       {{"k_m1", config.k_m1},
                        {"k_m2_activation", config.k_m2_activation},
                        {"k_m2_extraction", config.k_m2_extraction},
                        {"pagerank_iterations", config.pagerank_iterations},
                        {"damping", config.damping},
                        {"walk", config.directed_walk ? "directed" : "undirected"},
                        {"blocklist", std::move(blocklist)}}},
                      {"files", std::move(files)}};
    write_text_file(root / bundle_paths::kIndex, dump_json(doc));
}

std::vector<std::string> read_class_names(const fs::path& dataset_manifest) {
    try {
        return nlohmann::json::parse(read_text_file(dataset_manifest)).at("classes").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(dataset_manifest.string() + ": " + e.what());
    }
}

std::vector<std::string> read_layer_names(const fs::path& model_manifest) {
    try {
        const auto doc = nlohmann::json::parse(read_text_file(model_manifest));
        std::vector<std::string> names;
        for (const auto& l : doc.at("layers")) {
            names.push_back(l.at("name").get<std::string>());
        }
        return names;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(model_manifest.string() + ": " + e.what());
    }
}

nlohmann::json read_json(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config, std::ostream* log) {
    config.validate();
    const fs::path& root = config.output_dir;
    fs::create_directories(root);
    const fs::path marker = root / bundle_paths::kIncomplete;
    write_text_file(marker, "running\n");

    PipelineResult result;
    StageRunner stage(log, &result.timings);
    try {
        const auto in = stage("load", [&] { return load_inputs(config); });
        const auto traced = stage("forward", [&] { return trace_corpus(in.model, in.dataset, config.workers); });
        const auto zs = stage("channel-max", [&] { return channel_max_all(in.model, traced); });
        const auto a = stage("activations", [&] {
            auto out = activations_all(config, in, zs);
            write_activations(root, out);
            return out;
        });
        const auto inf = stage("influences", [&] {
            auto out = influences_all(config, in, traced);
            write_influences(root, out);
            return out;
        });
        stage("graphs", [&] {
            std::vector<std::size_t> classes(in.dataset.n_classes());
            for (std::size_t c = 0; c < classes.size(); ++c) classes[c] = c;
            const auto graphs = graphs_for(config, a, inf, in.dataset.class_names, classes);
            write_graphs(root, graphs);
            result.n_graphs = graphs.size();
        });
        stage("analytics", [&] { write_analytics(root, in, traced, a, zs); });
        stage("export", [&] {
            save_model(in.model, root / bundle_paths::kModel, root / bundle_paths::kWeights);
            save_dataset(in.dataset, root / bundle_paths::kDataset);
            write_index(root, config, in);
        });
    } catch (const std::exception& e) {
        try {
            write_text_file(marker, "stage: " + stage.current() + "\nerror: " + e.what() + "\n");
        } catch (...) {
        }
        throw;
    }
    fs::remove(marker);
    return result;
}

std::vector<AggregatedActivations> run_aggregate_stage(const PipelineConfig& config, std::ostream* log) {
    config.validate();
    StageRunner stage(log, nullptr);
    const auto in = stage("load", [&] { return load_inputs(config); });
    const auto traced = stage("forward", [&] { return trace_corpus(in.model, in.dataset, config.workers); });
    const auto zs = stage("channel-max", [&] { return channel_max_all(in.model, traced); });
    return stage("activations", [&] {
        auto out = activations_all(config, in, zs);
        write_activations(config.output_dir, out);
        return out;
    });
}

std::vector<AggregatedInfluences> run_influence_stage(const PipelineConfig& config, std::ostream* log) {
    config.validate();
    StageRunner stage(log, nullptr);
    const auto in = stage("load", [&] { return load_inputs(config); });
    const auto traced = stage("forward", [&] { return trace_corpus(in.model, in.dataset, config.workers); });
    return stage("influences", [&] {
        auto out = influences_all(config, in, traced);
        write_influences(config.output_dir, out);
        return out;
    });
}

std::vector<AttributionGraph> run_graph_stage(const PipelineConfig& config, std::optional<std::size_t> class_id,
                                              std::ostream* log) {
    config.validate();
    StageRunner stage(log, nullptr);
    const fs::path& root = config.output_dir;
    const auto class_names = stage("load", [&] { return read_class_names(config.dataset_manifest); });
    const auto layer_names = read_layer_names(config.model_manifest);

    std::vector<AggregatedActivations> a;
    std::vector<AggregatedInfluences> inf;
    stage("read-aggregates", [&] {
        for (std::size_t l = 0; l < layer_names.size(); ++l) {
            a.push_back(activations_from_json(read_json(root / bundle_paths::activations(layer_names[l]))));
            if (l > 0) inf.push_back(influences_from_json(read_json(root / bundle_paths::influences(layer_names[l]))));
        }
    });
    std::vector<std::size_t> classes;
    if (class_id) {
        if (*class_id >= class_names.size()) {
            throw Error(ErrorKind::index_out_of_range, "class " + std::to_string(*class_id) + " outside " +
                                                           std::to_string(class_names.size()) + " classes");
        }
        classes.push_back(*class_id);
    } else {
        for (std::size_t c = 0; c < class_names.size(); ++c) classes.push_back(c);
    }
    return stage("graphs", [&] {
        auto graphs = graphs_for(config, a, inf, class_names, classes);
        write_graphs(root, graphs);
        return graphs;
    });
}

void run_analyze_stage(const PipelineConfig& config, std::ostream* log) {
    config.validate();
    StageRunner stage(log, nullptr);
    const auto in = stage("load", [&] { return load_inputs(config); });
    const auto traced = stage("forward", [&] { return trace_corpus(in.model, in.dataset, config.workers); });
    const auto zs = stage("channel-max", [&] { return channel_max_all(in.model, traced); });
    std::vector<AggregatedActivations> a;
    stage("read-aggregates", [&] {
        for (const auto& layer : in.model.layers) {
            a.push_back(activations_from_json(read_json(config.output_dir / bundle_paths::activations(layer.name))));
        }
    });
    stage("analytics", [&] { write_analytics(config.output_dir, in, traced, a, zs); });
}

}  // namespace attrigraph
