#include "attrigraph/service.hpp"

#include <algorithm>
#include <charconv>
#include <optional>
#include <ostream>

#include "attrigraph/error.hpp"
#include "attrigraph/io_formats.hpp"
#include "attrigraph/json_export.hpp"
#include "attrigraph/pipeline.hpp"
#include "httplib.h"

namespace attrigraph {

namespace fs = std::filesystem;

namespace {

json read_doc(const fs::path& root, const std::string& rel) {
    const auto path = root / rel;
    if (!fs::exists(path)) {
        throw Error(ErrorKind::missing_input, "bundle is missing " + rel);
    }
    try {
        return json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

ApiResponse ok(const json& doc) { return {200, doc.dump()}; }

ApiResponse error(int status, const std::string& message) {
    return {status, json{{"schema", kSchemaVersion}, {"kind", "error"}, {"status", status}, {"error", message}}.dump()};
}

std::optional<std::size_t> parse_index(std::string_view s) {
    std::size_t v = 0;
    if (s.empty()) return std::nullopt;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

std::vector<std::string_view> split_path(std::string_view path) {
    std::vector<std::string_view> parts;
    while (!path.empty()) {
        const auto slash = path.find('/');
        const auto part = path.substr(0, slash);
        if (!part.empty()) parts.push_back(part);
        if (slash == std::string_view::npos) break;
        path.remove_prefix(slash + 1);
    }
    return parts;
}

}  // namespace

BundleService::BundleService(const fs::path& bundle_dir) {
    if (fs::exists(bundle_dir / bundle_paths::kIncomplete)) {
        throw Error(ErrorKind::invalid_argument,
                    "bundle " + bundle_dir.string() + " is incomplete (see " + bundle_paths::kIncomplete + ")");
    }
    index_ = read_doc(bundle_dir, bundle_paths::kIndex);
    try {
        class_names_ = index_.at("classes").get<std::vector<std::string>>();
        for (const auto& l : index_.at("layers")) layer_names_.push_back(l.at("name").get<std::string>());
    } catch (const json::exception& e) {
        throw FormatError(std::string("bundle index: ") + e.what());
    }
    summaries_ = read_doc(bundle_dir, bundle_paths::kSummaries);
    similarity_ = read_doc(bundle_dir, bundle_paths::kSimilarity);
    for (std::size_t c = 0; c < class_names_.size(); ++c) {
        graphs_.push_back(read_doc(bundle_dir, bundle_paths::graph(c)).dump());
    }
    for (const auto& layer : layer_names_) {
        embeddings_.push_back(read_doc(bundle_dir, bundle_paths::embedding(layer)).dump());
        examples_.push_back(read_doc(bundle_dir, bundle_paths::examples(layer)));
    }
}

std::ptrdiff_t BundleService::find_layer(std::string_view name) const {
    const auto it = std::find(layer_names_.begin(), layer_names_.end(), name);
    return it == layer_names_.end() ? -1 : it - layer_names_.begin();
}

ApiResponse BundleService::handle(std::string_view path, const std::map<std::string, std::string>& query) const {
    const auto parts = split_path(path);
    if (parts.size() < 2 || parts[0] != "api") return error(404, "no such endpoint");
    if (parts.size() == 2 && parts[1] == "meta") return meta();
    if (parts.size() == 2 && parts[1] == "classes") return classes(query);
    if (parts.size() == 4 && parts[1] == "class" && parts[3] == "graph") return graph(parts[2]);
    if (parts.size() == 3 && parts[1] == "embedding") return embedding(parts[2]);
    if (parts.size() == 5 && parts[1] == "channel" && parts[4] == "examples") {
        return examples(parts[2], parts[3], query);
    }
    return error(404, "no such endpoint");
}

ApiResponse BundleService::meta() const {
    json doc = {{"schema", kSchemaVersion},
                {"kind", "meta"},
                {"model", index_.at("model")},
                {"dataset", index_.at("dataset")},
                {"n_classes", index_.at("n_classes")},
                {"n_images", index_.at("n_images")},
                {"classes", index_.at("classes")},
                {"layers", index_.at("layers")},
                {"default_layer", index_.at("default_layer")},
                {"params", index_.at("params")}};
    return ok(doc);
}

ApiResponse BundleService::classes(const std::map<std::string, std::string>& query) const {
    std::string layer = similarity_.at("default_layer").get<std::string>();
    if (const auto it = query.find("layer"); it != query.end()) {
        if (find_layer(it->second) < 0) return error(404, "unknown layer '" + it->second + "'");
        layer = it->second;
    }
    const auto& rows = summaries_.at("classes");
    std::vector<std::size_t> order(rows.size());
    for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;

    std::string sort = "id";
    std::optional<std::size_t> selected;
    if (const auto it = query.find("sort"); it != query.end()) {
        sort = it->second;
        const std::string_view s = sort;
        if (s == "accuracy:asc" || s == "accuracy:desc") {
            const bool asc = s == "accuracy:asc";
            std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
                const double ax = rows[x].at("top1_accuracy").get<double>();
                const double ay = rows[y].at("top1_accuracy").get<double>();
                return asc ? ax < ay : ax > ay;
            });
        } else if (s.starts_with("similarity:")) {
            selected = parse_index(s.substr(11));
            if (!selected) return error(400, "malformed sort '" + sort + "'");
            if (*selected >= rows.size()) return error(404, "unknown class " + std::to_string(*selected));
            order = similarity_.at("layers").at(layer).at("rankings").at(*selected).get<std::vector<std::size_t>>();
        } else if (s != "id") {
            return error(400, "malformed sort '" + sort + "', expected similarity:<id>, accuracy:asc or accuracy:desc");
        }
    }

    json out = json::array();
    for (auto c : order) {
        json row = rows.at(c);
        if (selected) {
            row["similarity"] = similarity_.at("layers").at(layer).at("matrix").at(*selected).at(c);
        }
        out.push_back(std::move(row));
    }
    return ok({{"schema", kSchemaVersion},
               {"kind", "classes"},
               {"sort", sort},
               {"layer", layer},
               {"classes", std::move(out)}});
}

ApiResponse BundleService::graph(std::string_view id) const {
    const auto c = parse_index(id);
    if (!c || *c >= graphs_.size()) return error(404, "unknown class '" + std::string(id) + "'");
    return {200, graphs_[*c]};
}

ApiResponse BundleService::embedding(std::string_view layer) const {
    const auto l = find_layer(layer);
    if (l < 0) return error(404, "unknown layer '" + std::string(layer) + "'");
    return {200, embeddings_[static_cast<std::size_t>(l)]};
}

ApiResponse BundleService::examples(std::string_view layer, std::string_view channel,
                                    const std::map<std::string, std::string>& query) const {
    const auto l = find_layer(layer);
    if (l < 0) return error(404, "unknown layer '" + std::string(layer) + "'");
    const auto& channels = examples_[static_cast<std::size_t>(l)].at("channels");
    const auto ch = parse_index(channel);
    if (!ch || *ch >= channels.size()) {
        return error(404, "unknown channel '" + std::string(channel) + "' in layer '" + std::string(layer) + "'");
    }
    std::size_t k = 10;
    if (const auto it = query.find("k"); it != query.end()) {
        const auto parsed = parse_index(it->second);
        if (!parsed || *parsed == 0) return error(400, "k must be a positive integer");
        k = *parsed;
    }
    const auto& all = channels.at(*ch);
    json list = json::array();
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i) list.push_back(all.at(i));
    return ok({{"schema", kSchemaVersion},
               {"kind", "channel_examples"},
               {"layer", std::string(layer)},
               {"channel", *ch},
               {"k", k},
               {"examples", std::move(list)}});
}

void mount(httplib::Server& server, const BundleService& service) {
    server.Get(R"(/api/.*)", [&service](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> query;
        for (const auto& [key, value] : req.params) query.emplace(key, value);
        const auto r = service.handle(req.path, query);
        res.status = r.status;
        res.set_header("Cache-Control", "max-age=" + std::to_string(kCacheMaxAgeSeconds));
        res.set_content(r.body, "application/json");
    });
}

bool serve(const fs::path& bundle_dir, const std::string& host, int port, std::ostream* log) {
    const BundleService service(bundle_dir);
    httplib::Server server;
    mount(server, service);
    if (log) *log << "serving " << bundle_dir.string() << " on http://" << host << ":" << port << "\n" << std::flush;
    return server.listen(host, port);
}

}  // namespace attrigraph
