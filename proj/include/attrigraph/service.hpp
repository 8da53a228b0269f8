#pragma once

// Read-only HTTP API over a finished export bundle.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace httplib {
class Server;
}

namespace attrigraph {

inline constexpr int kCacheMaxAgeSeconds = 3600;

struct ApiResponse {
    int status = 200;
    std::string body;
};

/// Loads every document of the bundle once; handle() never touches disk and
/// never mutates, so concurrent requests need no locking.
class BundleService {
public:
    explicit BundleService(const std::filesystem::path& bundle_dir);

    ApiResponse handle(std::string_view path, const std::map<std::string, std::string>& query) const;

    std::size_t n_classes() const { return class_names_.size(); }
    const std::vector<std::string>& layer_names() const { return layer_names_; }

private:
    ApiResponse meta() const;
    ApiResponse classes(const std::map<std::string, std::string>& query) const;
    ApiResponse graph(std::string_view id) const;
    ApiResponse embedding(std::string_view layer) const;
    ApiResponse examples(std::string_view layer, std::string_view channel,
                         const std::map<std::string, std::string>& query) const;
    std::ptrdiff_t find_layer(std::string_view name) const;

    nlohmann::json index_;
    std::vector<std::string> class_names_;
    std::vector<std::string> layer_names_;
    nlohmann::json summaries_;
    nlohmann::json similarity_;
    std::vector<std::string> graphs_;
    std::vector<std::string> embeddings_;
    std::vector<nlohmann::json> examples_;
};

/// Registers GET /api/... on `server`. The service must outlive it.
void mount(httplib::Server& server, const BundleService& service);

/// Blocks until the server stops. Returns false if the port could not be bound.
bool serve(const std::filesystem::path& bundle_dir, const std::string& host, int port, std::ostream* log = nullptr);

}  // namespace attrigraph
