#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "attrigraph/activation_agg.hpp"
#include "attrigraph/dataset.hpp"
#include "attrigraph/graph_build.hpp"
#include "attrigraph/influence_agg.hpp"
#include "attrigraph/model.hpp"
#include "json.hpp"

namespace attrigraph {

struct BlockedChannel {
    std::string layer;
    std::size_t channel = 0;

    friend bool operator==(const BlockedChannel&, const BlockedChannel&) = default;
};

struct PipelineConfig {
    std::filesystem::path model_manifest;
    std::filesystem::path weights_dir;  // empty: "weights" next to the model manifest
    std::filesystem::path dataset_manifest;
    std::filesystem::path output_dir;
    std::size_t k_m1 = kDefaultInfluenceTopK;
    double k_m2_activation = kDefaultActivationShare;
    double k_m2_extraction = kDefaultExtractionShare;
    std::size_t pagerank_iterations = kDefaultPageRankIterations;
    double damping = kDefaultDamping;
    bool directed_walk = false;
    std::vector<BlockedChannel> blocklist;
    std::size_t workers = 1;

    std::filesystem::path resolved_weights_dir() const;
    /// Throws Error(invalid_argument) on out-of-range knobs.
    void validate() const;
};

/// Relative paths in the document are resolved against `base_dir`.
PipelineConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

/// ATTRIGRAPH_WORKERS, when set to a positive integer, replaces `workers`.
void apply_env_overrides(PipelineConfig& config);

/// Names of the bundle's files, relative to the bundle root.
namespace bundle_paths {
inline const char* const kIndex = "bundle.json";
inline const char* const kModel = "model.json";
inline const char* const kWeights = "weights";
inline const char* const kDataset = "dataset.json";
inline const char* const kIncomplete = ".incomplete";
std::string activations(const std::string& layer);
std::string influences(const std::string& layer);
std::string graph(std::size_t class_id);
std::string embedding(const std::string& layer);
std::string examples(const std::string& layer);
inline const char* const kSummaries = "analytics/summaries.json";
inline const char* const kSimilarity = "analytics/similarity.json";
}  // namespace bundle_paths

/// Forward passes over the whole dataset, one trace per image in dataset order.
std::vector<TracedImage> trace_corpus(const ModelManifest& model, const Dataset& dataset, std::size_t workers);

/// Blocked channel indices of `layer`, ascending. Throws on unknown layers
/// or channels.
std::vector<std::size_t> blocked_channels(const PipelineConfig& config, const ModelManifest& model,
                                          std::size_t layer);

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct PipelineResult {
    std::vector<StageTiming> timings;
    std::size_t n_graphs = 0;
};

/// forward -> Z -> A -> I -> per-class attribution graphs -> analytics,
/// written as an export bundle under config.output_dir. A `.incomplete`
/// marker exists while the run is in progress and stays behind (naming the
/// failed stage) if it fails. Timing lines go to `log` when non-null.
PipelineResult run_pipeline(const PipelineConfig& config, std::ostream* log = nullptr);

// Individual stages for the CLI. Each reads what it needs from the inputs
// or from an existing bundle and writes its own outputs.

/// Forward passes + Z + A; writes aggregates/A_<layer>.json.
std::vector<AggregatedActivations> run_aggregate_stage(const PipelineConfig& config, std::ostream* log = nullptr);

/// Forward passes + I; writes aggregates/I_<layer>.json.
std::vector<AggregatedInfluences> run_influence_stage(const PipelineConfig& config, std::ostream* log = nullptr);

/// Reads A and I from the bundle; writes graphs/class_<id>.json for the
/// requested class, or for every class.
std::vector<AttributionGraph> run_graph_stage(const PipelineConfig& config, std::optional<std::size_t> class_id,
                                              std::ostream* log = nullptr);

/// Forward passes + A from the bundle; writes analytics/*.
void run_analyze_stage(const PipelineConfig& config, std::ostream* log = nullptr);

}  // namespace attrigraph
