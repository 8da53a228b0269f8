#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "attrigraph/dataset.hpp"
#include "attrigraph/error.hpp"
#include "attrigraph/io_formats.hpp"
#include "attrigraph/model.hpp"
#include "attrigraph/pipeline.hpp"
#include "attrigraph/service.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace attrigraph;

namespace {

// Flag values; unset ones leave the config file (or defaults) alone.
struct Overrides {
    std::string config;
    std::string model, weights, dataset, output;
    std::optional<std::size_t> k_m1, iterations, workers;
    std::optional<double> k_m2_activation, k_m2_extraction, damping;
    std::optional<std::string> walk;
    std::vector<std::string> block;
};

void add_pipeline_options(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--model", o.model, "model manifest");
    cmd->add_option("--weights", o.weights, "weights directory (default: <model dir>/weights)");
    cmd->add_option("--dataset", o.dataset, "dataset manifest");
    cmd->add_option("-o,--output", o.output, "bundle directory");
    cmd->add_option("--k-m1", o.k_m1, "influences kept per column");
    cmd->add_option("--k-m2-activation", o.k_m2_activation, "cumulative share for activation selection");
    cmd->add_option("--k-m2-extraction", o.k_m2_extraction, "cumulative PageRank share kept per layer");
    cmd->add_option("--iterations", o.iterations, "PageRank iterations");
    cmd->add_option("--damping", o.damping, "PageRank damping");
    cmd->add_option("--walk", o.walk, "undirected or directed")->check(CLI::IsMember({"undirected", "directed"}));
    cmd->add_option("--block", o.block, "blocked channel as <layer>:<channel>, repeatable");
    cmd->add_option("-j,--workers", o.workers, "worker threads (also ATTRIGRAPH_WORKERS)");
}

PipelineConfig resolve(const Overrides& o) {
    PipelineConfig c;
    if (!o.config.empty()) c = load_config(o.config);
    apply_env_overrides(c);
    if (!o.model.empty()) c.model_manifest = o.model;
    if (!o.weights.empty()) c.weights_dir = o.weights;
    if (!o.dataset.empty()) c.dataset_manifest = o.dataset;
    if (!o.output.empty()) c.output_dir = o.output;
    if (o.k_m1) c.k_m1 = *o.k_m1;
    if (o.k_m2_activation) c.k_m2_activation = *o.k_m2_activation;
    if (o.k_m2_extraction) c.k_m2_extraction = *o.k_m2_extraction;
    if (o.iterations) c.pagerank_iterations = *o.iterations;
    if (o.damping) c.damping = *o.damping;
    if (o.walk) c.directed_walk = *o.walk == "directed";
    if (o.workers) c.workers = *o.workers;
    for (const auto& b : o.block) {
        const auto colon = b.rfind(':');
        if (colon == std::string::npos || colon == 0) {
            throw Error(ErrorKind::invalid_argument, "--block expects <layer>:<channel>, got '" + b + "'");
        }
        std::size_t ch = 0;
        try {
            std::size_t used = 0;
            ch = std::stoul(b.substr(colon + 1), &used);
            if (used != b.size() - colon - 1) throw std::invalid_argument(b);
        } catch (const std::exception&) {
            throw Error(ErrorKind::invalid_argument, "--block channel is not a number in '" + b + "'");
        }
        c.blocklist.push_back({b.substr(0, colon), ch});
    }
    return c;
}

void make_toy(const fs::path& dir, std::uint64_t seed, std::size_t per_class) {
    const auto model = make_toy_model(seed);
    save_model(model, dir / "model" / "model.json", dir / "model" / "weights");
    save_dataset(make_toy_corpus(seed, per_class), dir / "data" / "dataset.json");
    const nlohmann::json config = {{"model", "model/model.json"},
                                   {"dataset", "data/dataset.json"},
                                   {"output", "bundle"}};
    write_text_file(dir / "config.json", config.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"attrigraph: per-class attribution graphs for convolutional classifiers"};
    app.require_subcommand(1);

    Overrides o;
    auto* run = app.add_subcommand("run", "full pipeline: aggregates, graphs, analytics, bundle");
    auto* aggregate = app.add_subcommand("aggregate", "aggregated activations only");
    auto* influence = app.add_subcommand("influence", "aggregated influences only");
    auto* graph = app.add_subcommand("graph", "attribution graphs from the bundle's aggregates");
    auto* analyze = app.add_subcommand("analyze", "class summaries, similarity, embedding, examples");
    for (auto* cmd : {run, aggregate, influence, graph, analyze}) add_pipeline_options(cmd, o);
    std::optional<std::size_t> class_id;
    graph->add_option("--class", class_id, "only this class");

    std::string bundle;
    std::string host = "127.0.0.1";
    int port = 8080;
    auto* serve_cmd = app.add_subcommand("serve", "read-only HTTP API over a bundle");
    serve_cmd->add_option("bundle", bundle, "bundle directory")->required()->check(CLI::ExistingDirectory);
    serve_cmd->add_option("--host", host);
    serve_cmd->add_option("-p,--port", port)->check(CLI::Range(1, 65535));

    std::string toy_dir;
    std::uint64_t seed = 0;
    std::size_t per_class = 20;
    auto* toy = app.add_subcommand("make-toy", "write the seeded toy model, corpus and config");
    toy->add_option("dir", toy_dir, "output directory")->required();
    toy->add_option("--seed", seed);
    toy->add_option("--per-class", per_class)->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*toy) {
            make_toy(toy_dir, seed, per_class);
            std::cout << "wrote " << (fs::path(toy_dir) / "config.json").string() << "\n";
            return 0;
        }
        if (*serve_cmd) {
            if (!serve(bundle, host, port, &std::cerr)) {
                std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
                return 1;
            }
            return 0;
        }
        const auto config = resolve(o);
        if (*run) {
            const auto r = run_pipeline(config, &std::cerr);
            double total = 0.0;
            for (const auto& t : r.timings) total += t.seconds;
            std::fprintf(stderr, "[attrigraph] %zu graphs, %.3f s total\n", r.n_graphs, total);
        } else if (*aggregate) {
            run_aggregate_stage(config, &std::cerr);
        } else if (*influence) {
            run_influence_stage(config, &std::cerr);
        } else if (*graph) {
            run_graph_stage(config, class_id, &std::cerr);
        } else if (*analyze) {
            run_analyze_stage(config, &std::cerr);
        }
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
