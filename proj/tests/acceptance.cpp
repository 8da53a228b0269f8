// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "attrigraph/activation_agg.hpp"
#include "attrigraph/error.hpp"
#include "attrigraph/graph_build.hpp"
#include "attrigraph/influence_agg.hpp"
#include "attrigraph/io_formats.hpp"
#include "attrigraph/json_export.hpp"
#include "attrigraph/pipeline.hpp"
#include "attrigraph/service.hpp"
#include "attrigraph/tensor.hpp"
#include "httplib.h"
#include "support/bundle_compare.hpp"
#include "support/fixtures.hpp"
#include "support/graphs.hpp"
#include "support/oracles.hpp"
#include "support/schema_check.hpp"

using namespace attrigraph;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Records the first few failures; everything after that is just counted.
class Tally {
public:
    void check(bool ok, const std::string& what) {
        ++checks_;
        if (ok) return;
        ++failures_;
        if (failures_ <= 3) notes_ += (notes_.empty() ? "" : "; ") + what;
    }
    Outcome outcome(const std::string& summary) const {
        if (failures_ == 0) return {true, summary};
        return {false, std::to_string(failures_) + "/" + std::to_string(checks_) + " checks failed: " + notes_};
    }

private:
    std::size_t checks_ = 0;
    std::size_t failures_ = 0;
    std::string notes_;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Outcome convolution_oracle() {
    std::mt19937 rng(101);
    Tally t;
    double worst = 0.0, worst_identity = 0.0;
    const int fixtures = 120;
    for (int n = 0; n < fixtures; ++n) {
        const std::size_t h = 1 + rng() % 16, w = 1 + rng() % 16, cin = 1 + rng() % 8, cout = 1 + rng() % 8;
        const std::size_t kh = 1 + 2 * (rng() % 3), kw = 1 + 2 * (rng() % 3);
        const auto x = fixture::random_tensor(rng, h, w, cin);
        const auto k = fixture::random_kernel(rng, kh, kw, cin, cout);
        const auto got = conv2d_full(x, k);
        const auto want = oracle::conv_full(x, k);
        for (std::size_t p = 0; p < got.data.size(); ++p) {
            worst = std::max(worst, static_cast<double>(std::abs(got.data[p] - want.data[p])));
        }
        for (std::size_t j = 0; j < cout; ++j) {
            std::vector<double> sum(h * w, 0.0);
            for (std::size_t i = 0; i < cin; ++i) {
                const auto m = conv2d_single(x.channel(i), k.slice(i, j));
                for (std::size_t p = 0; p < m.data.size(); ++p) sum[p] += m.data[p];
            }
            const auto full = got.channel(j);
            for (std::size_t p = 0; p < sum.size(); ++p) {
                worst_identity = std::max(worst_identity, std::abs(sum[p] - full.data[p]));
            }
        }
    }
    t.check(worst <= 1e-4, "max |conv - reference| = " + fmt("%.3g", worst));
    t.check(worst_identity <= 1e-4, "max |sum of maps - conv| = " + fmt("%.3g", worst_identity));
    return t.outcome(std::to_string(fixtures) + " fixtures, max err " + fmt("%.2g", worst) + ", identity err " +
                     fmt("%.2g", worst_identity));
}

Outcome aggregation_oracle(const fixture::ToyCorpus& toy) {
    Tally t;
    const auto labels = toy.dataset.labels();
    const auto sizes = toy.dataset.class_sizes();
    for (std::size_t l = 0; l < toy.model.layers.size(); ++l) {
        const auto z = build_channel_max(toy.traced, l, toy.model.layers[l].name);
        for (const auto& method : {SelectionMethod::top(5), SelectionMethod::share(kDefaultActivationShare)}) {
            const auto a = aggregate_activations(z, labels, 5, method);
            std::vector<std::uint32_t> want(5 * z.n_channels, 0);
            for (std::size_t i = 0; i < z.n_images; ++i) {
                const auto picked = method.kind == SelectionMethod::Kind::top_k
                                        ? oracle::select_top_k(z.row(i), method.k)
                                        : oracle::select_share<float>(z.row(i), method.fraction);
                for (auto j : picked) ++want[labels[i] * z.n_channels + j];
            }
            t.check(a.counts == want, "layer " + z.layer + " counts differ from re-selection");
            if (method.kind == SelectionMethod::Kind::top_k) {
                for (std::size_t c = 0; c < 5; ++c) {
                    const auto r = a.row(c);
                    t.check(std::accumulate(r.begin(), r.end(), 0u) == 5 * sizes[c],
                            "layer " + z.layer + " class " + std::to_string(c) + " budget");
                }
            }
        }
        const std::vector<std::size_t> blocked = {0, z.n_channels / 2, z.n_channels - 1};
        for (const auto& method : {SelectionMethod::top(5), SelectionMethod::share(kDefaultActivationShare)}) {
            const auto a = aggregate_activations(z, labels, 5, method, blocked);
            for (std::size_t c = 0; c < 5; ++c)
                for (auto j : blocked) t.check(a.at(c, j) == 0, "blocked channel " + std::to_string(j) + " counted");
        }
    }
    return t.outcome("M1 and M2 exact on " + std::to_string(toy.traced.size()) +
                     " images, budgets hold, blocked channels zero");
}

Outcome influence_oracle(const fixture::ToyCorpus& toy) {
    Tally t;
    const std::size_t k = kDefaultInfluenceTopK;
    const auto agg = aggregate_influences(toy.traced, toy.model, 1, 5, k);
    std::vector<std::uint32_t> want(agg.counts.size(), 0);
    for (const auto& img : toy.traced) {
        const auto m = influence_matrix(toy.model, 1, img.trace);
        for (std::size_t j = 0; j < m.cur_channels; ++j) {
            const auto col = m.column(j);
            for (auto i : oracle::full_sort_top_k(col, k)) ++want[agg.index(img.label, i, j)];
        }
    }
    t.check(agg.counts == want, "counts differ from full-sort oracle");
    const auto sizes = toy.dataset.class_sizes();
    for (std::size_t c = 0; c < 5; ++c) {
        for (std::size_t j = 0; j < agg.cur_channels; ++j) {
            std::uint32_t col = 0;
            for (std::size_t i = 0; i < agg.prev_channels; ++i) col += agg.at(c, i, j);
            t.check(col <= k * sizes[c], "column budget exceeded");
        }
    }
    std::mt19937 rng(303);
    const int blocks = 200;
    for (int n = 0; n < blocks; ++n) {
        const auto a = fixture::random_map(rng, 6, 4);
        const auto b = fixture::random_map(rng, 4, 5);
        t.check(merge_two_hop(a, b) == oracle::max_min(a, b), "max-min merge differs");
    }
    return t.outcome("full-sort oracle exact, column budgets hold, " + std::to_string(blocks) +
                     " random 6x4x5 max-min merges exact");
}

Outcome pagerank_checks() {
    Tally t;
    std::mt19937 rng(404);
    double worst = 0.0, worst_sum = 0.0, worst_scale = 0.0;
    const int graphs = 40;
    for (int n = 0; n < graphs; ++n) {
        std::vector<std::size_t> sizes;
        std::size_t total = 0;
        const std::size_t target = 20 + rng() % 31;
        while (total < target) {
            const std::size_t s = std::min<std::size_t>(2 + rng() % 9, target - total);
            sizes.push_back(s);
            total += s;
        }
        if (sizes.size() < 2) sizes.push_back(1);
        const auto g = fixture::random_layered(rng, sizes, 0.35);
        const auto full = build_full_graph(g.a, g.inf, 0);
        for (bool directed : {false, true}) {
            const auto s = personalized_pagerank(full, {0.85, 100, directed});
            const auto want = oracle::pagerank(full.n_vertices(), fixture::dense_weights(g, directed),
                                               fixture::personalization(g), 0.85, 100);
            worst_sum = std::max(worst_sum, std::abs(std::accumulate(s.begin(), s.end(), 0.0) - 1.0));
            for (std::size_t v = 0; v < s.size(); ++v) worst = std::max(worst, std::abs(s[v] - want[v]));

            auto scaled = full;
            for (auto& e : scaled.edges) e.weight *= 7;
            const auto s7 = personalized_pagerank(scaled, {0.85, 100, directed});
            for (std::size_t v = 0; v < s.size(); ++v) worst_scale = std::max(worst_scale, std::abs(s[v] - s7[v]));
        }
    }
    t.check(worst_sum <= 1e-9, "sum deviates by " + fmt("%.3g", worst_sum));
    t.check(worst <= 1e-8, "oracle deviation " + fmt("%.3g", worst));
    t.check(worst_scale <= 1e-12, "x7 scaling moved scores by " + fmt("%.3g", worst_scale));

    // regular symmetric graph, uniform personalization
    FullNetworkGraph sym;
    sym.layer_names = {"a", "b", "c"};
    sym.layer_offsets = {0, 4, 8, 12};
    sym.personalization.assign(12, 1.0);
    sym.activation_counts.assign(12, 1);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            sym.edges.push_back({i, 4 + j, 3});
            sym.edges.push_back({4 + i, 8 + j, 3});
        }
    }
    // Outer and middle layers differ in degree, so only uniformity within a
    // layer is expected there; the complete bipartite graph is fully regular.
    FullNetworkGraph bip;
    bip.layer_names = {"a", "b"};
    bip.layer_offsets = {0, 5, 10};
    bip.personalization.assign(10, 1.0);
    bip.activation_counts.assign(10, 1);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) bip.edges.push_back({i, 5 + j, 2});
    double worst_uniform = 0.0;
    for (double s : personalized_pagerank(bip)) worst_uniform = std::max(worst_uniform, std::abs(s - 0.1));
    t.check(worst_uniform <= 1e-12, "symmetric graph not uniform, off by " + fmt("%.3g", worst_uniform));
    const auto s3 = personalized_pagerank(sym);
    double layer_spread = 0.0;
    for (std::size_t l = 0; l < 3; ++l)
        for (std::size_t j = 1; j < 4; ++j) layer_spread = std::max(layer_spread, std::abs(s3[l * 4 + j] - s3[l * 4]));
    t.check(layer_spread <= 1e-12, "symmetric layers not uniform within layer");

    return t.outcome(std::to_string(graphs) + " graphs of 20-50 vertices: sum err " + fmt("%.2g", worst_sum) +
                     ", oracle err " + fmt("%.2g", worst) + ", x7 scale err " + fmt("%.2g", worst_scale) +
                     ", symmetric case uniform");
}

bool minimal_prefix(std::vector<double> layer_scores, std::size_t kept, double share) {
    double total = std::accumulate(layer_scores.begin(), layer_scores.end(), 0.0);
    std::sort(layer_scores.rbegin(), layer_scores.rend());
    double without_last = 0.0;
    for (std::size_t i = 0; i + 1 < kept; ++i) without_last += layer_scores[i];
    const double with_last = without_last + (kept ? layer_scores[kept - 1] : 0.0);
    const double need = share * total * (1.0 - 1e-12);
    return with_last >= need && without_last < need;
}

Outcome extraction_checks(const fs::path& bundle) {
    Tally t;
    FullNetworkGraph uniform;
    uniform.layer_names = {"u"};
    uniform.layer_offsets = {0, 100};
    uniform.personalization.assign(100, 1.0);
    uniform.activation_counts.assign(100, 1);
    const std::vector<double> flat(100, 0.01);
    const auto u = extract_attribution_graph(uniform, flat, 0.075);
    t.check(u.vertices.size() == 8, "uniform case kept " + std::to_string(u.vertices.size()));

    std::mt19937 rng(505);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (int n = 0; n < 20; ++n) {
        const std::size_t size = 5 + rng() % 60;
        FullNetworkGraph g;
        g.layer_names = {"r"};
        g.layer_offsets = {0, size};
        g.personalization.assign(size, 1.0);
        g.activation_counts.assign(size, 1);
        std::vector<double> scores(size);
        for (auto& s : scores) s = ud(rng);
        std::vector<std::size_t> previous;
        for (double share = 0.025; share < 1.0; share += 0.025) {
            const auto out = extract_attribution_graph(g, scores, share);
            std::vector<std::size_t> kept;
            for (const auto& v : out.vertices) kept.push_back(v.channel);
            t.check(std::includes(kept.begin(), kept.end(), previous.begin(), previous.end()),
                    "kept set shrank as the share grew");
            t.check(minimal_prefix(scores, kept.size(), share), "prefix not minimal");
            previous = kept;
        }
    }

    const auto index = json::parse(read_text_file(bundle / bundle_paths::kIndex));
    const auto n_classes = index.at("n_classes").get<std::size_t>();
    std::vector<AggregatedActivations> a;
    std::vector<AggregatedInfluences> inf;
    const auto layers = index.at("layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto name = layers[l].at("name").get<std::string>();
        a.push_back(activations_from_json(json::parse(read_text_file(bundle / bundle_paths::activations(name)))));
        if (l > 0) inf.push_back(influences_from_json(json::parse(read_text_file(bundle / bundle_paths::influences(name)))));
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
        const auto g = attribution_graph_from_json(json::parse(read_text_file(bundle / bundle_paths::graph(c))));
        const auto full = build_full_graph(a, inf, c);
        const auto scores = personalized_pagerank(full);
        for (std::size_t l = 0; l < full.n_layers(); ++l) {
            std::size_t kept = 0;
            for (const auto& v : g.vertices) {
                if (v.layer != l) continue;
                ++kept;
                t.check(v.activation_count == a[l].at(c, v.channel), "vertex count is not A");
            }
            const auto ls = std::span<const double>(scores).subspan(full.layer_offsets[l], full.layer_size(l));
            t.check(minimal_prefix({ls.begin(), ls.end()}, kept, g.params.extraction_share),
                    "class " + std::to_string(c) + " layer " + std::to_string(l) + " not a minimal prefix");
        }
        for (const auto& e : g.edges) {
            t.check(e.to_layer == e.from_layer + 1, "edge skips or reverses layers");
            t.check(g.contains(e.from_layer, e.from_channel) && g.contains(e.to_layer, e.to_channel),
                    "edge endpoint not kept");
            t.check(e.influence_count > 0 && e.influence_count == inf[e.from_layer].at(c, e.from_channel, e.to_channel),
                    "edge weight is not I");
        }
        std::size_t possible = 0;
        for (const auto& e : full.edges) {
            possible += g.contains(full.layer_of(e.from), full.channel_of(e.from)) &&
                        g.contains(full.layer_of(e.to), full.channel_of(e.to));
        }
        t.check(possible == g.edges.size(), "an edge between kept vertices was dropped");
    }
    return t.outcome("uniform 100 -> 8, monotone and minimal on 20 random vectors, " + std::to_string(n_classes) +
                     " toy class graphs are induced layered subgraphs");
}

Outcome determinism(const fixture::TempDir& dir) {
    Tally t;
    auto config = fixture::write_toy_inputs(dir / "det", 20);
    config.output_dir = dir / "det/w1";
    config.workers = 1;
    run_pipeline(config);
    config.output_dir = dir / "det/w8";
    config.workers = 8;
    run_pipeline(config);
    auto diff = fixture::bundle_diff(dir / "det/w1", dir / "det/w8");
    t.check(diff.empty(), "1 vs 8 workers differ in " + (diff.empty() ? "" : diff.front()));
    config.output_dir = dir / "det/w1b";
    config.workers = 1;
    run_pipeline(config);
    diff = fixture::bundle_diff(dir / "det/w1", dir / "det/w1b");
    t.check(diff.empty(), "repeat run differs in " + (diff.empty() ? "" : diff.front()));
    config.output_dir = dir / "det/w1";
    run_pipeline(config);  // over the top of an existing bundle
    diff = fixture::bundle_diff(dir / "det/w1", dir / "det/w1b");
    t.check(diff.empty(), "overwrite run differs in " + (diff.empty() ? "" : diff.front()));
    return t.outcome(std::to_string(fixture::snapshot(dir / "det/w1").size()) +
                     " files byte-identical across 1/8 workers and repeated runs");
}

Outcome runtime(const fixture::TempDir& dir) {
    Tally t;
    auto config = fixture::write_toy_inputs(dir / "rt", 20);
    const auto t0 = Clock::now();
    const auto r = run_pipeline(config);
    const double total = seconds_since(t0);
    t.check(total < 60.0, "pipeline took " + fmt("%.2f", total) + " s");
    t.check(r.n_graphs == 5, "expected 5 graphs");

    std::vector<AggregatedActivations> a;
    std::vector<AggregatedInfluences> inf;
    for (const std::string name : {"mixA", "mixB"}) {
        a.push_back(activations_from_json(json::parse(read_text_file(config.output_dir / bundle_paths::activations(name)))));
    }
    inf.push_back(influences_from_json(json::parse(read_text_file(config.output_dir / bundle_paths::influences("mixB")))));
    double slowest = 0.0;
    for (std::size_t c = 0; c < 5; ++c) {
        const auto g = build_full_graph(a, inf, c);
        const auto p0 = Clock::now();
        personalized_pagerank(g);
        slowest = std::max(slowest, seconds_since(p0));
    }
    t.check(slowest < 1.0, "pagerank took " + fmt("%.3f", slowest) + " s");
    return t.outcome("100 images, 5 classes: pipeline " + fmt("%.3f", total) + " s, slowest per-class PageRank " +
                     fmt("%.2g", slowest) + " s");
}

Outcome format_fuzz() {
    Tally t;
    RawTensor base{{3, 5, 7}, std::vector<float>(105)};
    std::iota(base.data.begin(), base.data.end(), 0.5f);
    const auto bytes = encode_tensor(base);
    const std::size_t header = 5 + 4 * base.dims.size();
    std::mt19937 rng(606);
    int rejected = 0;
    const int trials = 1000;
    for (int n = 0; n < trials; ++n) {
        auto corrupt = bytes;
        const std::size_t pos = rng() % header;
        corrupt[pos] ^= static_cast<std::uint8_t>(1 + rng() % 255);
        try {
            decode_tensor(corrupt);
            t.check(false, "accepted corruption at byte " + std::to_string(pos));
        } catch (const FormatError&) {
            ++rejected;
        } catch (const std::exception& e) {
            t.check(false, std::string("wrong exception type: ") + e.what());
        }
    }
    return t.outcome(std::to_string(rejected) + "/" + std::to_string(trials) + " corrupted headers rejected");
}

Outcome http_contract(const fs::path& bundle) {
    Tally t;
    const std::string dir = ATTRIGRAPH_SCHEMA_DIR;
    const auto meta_s = schema::load(dir + "/meta.schema.json");
    const auto classes_s = schema::load(dir + "/classes.schema.json");
    const auto graph_s = schema::load(dir + "/graph.schema.json");
    const auto embedding_s = schema::load(dir + "/embedding.schema.json");
    const auto examples_s = schema::load(dir + "/examples.schema.json");
    const auto error_s = schema::load(dir + "/error.schema.json");

    const BundleService svc(bundle);
    httplib::Server server;
    mount(server, svc);
    const int port = server.bind_to_any_port("127.0.0.1");
    if (port <= 0) return {false, "could not bind a local port"};
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client client("127.0.0.1", port);

    std::size_t requests = 0;
    auto get = [&](const std::string& path, int status, const schema::Validator& v) {
        ++requests;
        const auto res = client.Get(path);
        if (!res) {
            t.check(false, path + ": no response");
            return json();
        }
        t.check(res->status == status, path + ": status " + std::to_string(res->status));
        t.check(res->get_header_value("Cache-Control").rfind("max-age=", 0) == 0, path + ": no Cache-Control");
        t.check(res->get_header_value("Content-Type") == "application/json", path + ": not JSON");
        json doc;
        try {
            doc = json::parse(res->body);
        } catch (const json::exception&) {
            t.check(false, path + ": body is not JSON");
            return doc;
        }
        const auto errors = v.check(doc);
        t.check(errors.empty(), path + ": " + (errors.empty() ? "" : errors.front()));
        return doc;
    };

    const auto meta = get("/api/meta", 200, meta_s);
    get("/api/classes", 200, classes_s);
    get("/api/classes?sort=accuracy:asc", 200, classes_s);
    get("/api/classes?sort=accuracy:desc", 200, classes_s);
    const auto n_classes = meta.value("n_classes", 0);
    for (int c = 0; c < n_classes; ++c) {
        const auto doc = get("/api/classes?sort=similarity:" + std::to_string(c), 200, classes_s);
        t.check(doc.contains("classes") && doc["classes"][0]["id"] == c, "similarity sort does not lead with the class");
        get("/api/class/" + std::to_string(c) + "/graph", 200, graph_s);
    }
    for (const auto& l : meta.value("layers", json::array())) {
        const auto name = l.at("name").get<std::string>();
        get("/api/classes?sort=similarity:0&layer=" + name, 200, classes_s);
        get("/api/embedding/" + name, 200, embedding_s);
        for (int ch = 0; ch < l.at("channels").get<int>(); ++ch) {
            get("/api/channel/" + name + "/" + std::to_string(ch) + "/examples?k=10", 200, examples_s);
        }
        get("/api/channel/" + name + "/" + std::to_string(l.at("channels").get<int>()) + "/examples", 404, error_s);
    }
    get("/api/class/999/graph", 404, error_s);
    get("/api/class/abc/graph", 404, error_s);
    get("/api/embedding/nope", 404, error_s);
    get("/api/classes?layer=nope", 404, error_s);
    get("/api/classes?sort=similarity:999", 404, error_s);
    get("/api/classes?sort=bogus", 400, error_s);
    get("/api/classes?sort=similarity:zero", 400, error_s);
    get("/api/channel/mixA/0/examples?k=-3", 400, error_s);

    server.stop();
    th.join();
    return t.outcome(std::to_string(requests) + " requests over a socket validate against their schemas, 404/400 paths covered");
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };

    fixture::TempDir work("acceptance");
    std::optional<fixture::ToyCorpus> toy;
    fs::path toy_bundle;
    auto ensure_toy = [&]() -> const fixture::ToyCorpus& {
        if (!toy) toy = fixture::toy_corpus(20);
        return *toy;
    };
    auto ensure_bundle = [&]() -> const fs::path& {
        if (toy_bundle.empty()) {
            auto config = fixture::write_toy_inputs(work / "toy", 20);
            run_pipeline(config);
            toy_bundle = config.output_dir;
        }
        return toy_bundle;
    };

    const std::vector<Criterion> criteria = {
        {"convolution-oracle", [&] { return convolution_oracle(); }},
        {"aggregation-oracles", [&] { return aggregation_oracle(ensure_toy()); }},
        {"influence-oracles", [&] { return influence_oracle(ensure_toy()); }},
        {"pagerank", [&] { return pagerank_checks(); }},
        {"extraction", [&] { return extraction_checks(ensure_bundle()); }},
        {"determinism", [&] { return determinism(work); }},
        {"desk-runtime", [&] { return runtime(work); }},
        {"format-fuzzing", [&] { return format_fuzz(); }},
        {"http-contract", [&] { return http_contract(ensure_bundle()); }},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
