#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "attrigraph/tensor.hpp"

namespace attrigraph {

struct ConvStep {
    Kernel4 kernel;
    std::vector<float> bias;  // empty when the step has no bias
    bool relu = true;

    std::size_t in_channels() const { return kernel.in_channels; }
    std::size_t out_channels() const { return kernel.out_channels; }
};

/// One parallel path inside a primary layer: one or two chained conv steps
/// whose output lands at `channel_offset` in the concatenated layer output.
struct Branch {
    std::vector<ConvStep> steps;
    std::size_t channel_offset = 0;

    std::size_t out_channels() const { return steps.empty() ? 0 : steps.back().out_channels(); }
};

struct PrimaryLayer {
    std::string name;
    std::vector<Branch> branches;
    bool pool = false;  // maxpool2 after concatenation

    std::size_t out_channels() const;
};

/// Global max pool -> dense -> softmax.
struct DenseHead {
    Map2 weights;  // n_classes x last-layer channels
    std::vector<float> bias;

    std::size_t n_classes() const { return weights.height; }
};

struct InputDims {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;

    friend bool operator==(const InputDims&, const InputDims&) = default;
};

/// A model manifest with every kernel bound. Immutable once validated.
struct ModelManifest {
    std::string name;
    InputDims input;
    std::vector<PrimaryLayer> layers;
    DenseHead head;

    std::size_t n_classes() const { return head.n_classes(); }
    std::optional<std::size_t> layer_index(const std::string& layer_name) const;
    /// Channels feeding layer `l` (the input's channels for l = 0).
    std::size_t input_channels(std::size_t l) const;
};

/// Throws Error naming the offending layer/branch if any structural
/// invariant is violated.
void validate_model(const ModelManifest& model);

ModelManifest load_model(const std::filesystem::path& manifest_path, const std::filesystem::path& weights_dir);

/// Writes the manifest JSON and one tensor file per kernel/bias into
/// `weights_dir`. Output bytes depend only on the model.
void save_model(const ModelManifest& model, const std::filesystem::path& manifest_path,
                const std::filesystem::path& weights_dir);

struct LayerTrace {
    Tensor3 output;                        // post-concatenation, post-pool
    std::vector<std::optional<Tensor3>> inner;  // per branch: activation after step 1 of a 2-step branch
};

struct ForwardTrace {
    std::vector<LayerTrace> layers;
    std::vector<float> probabilities;

    bool empty() const { return layers.empty(); }
};

/// A corpus image together with its forward trace.
struct TracedImage {
    int id = 0;
    int label = 0;
    ForwardTrace trace;
};

/// Runs one conv step: conv, optional bias, optional relu.
Tensor3 run_step(const ConvStep& step, const Tensor3& x);

ForwardTrace forward(const ModelManifest& model, const Tensor3& image);

/// Desk-scale stand-in for a mixed-layer network: 16x16x3 input, two pooled
/// layers of 12 and 16 channels, five classes.
ModelManifest make_toy_model(std::uint64_t seed);

/// Uniform float in [lo, hi) from the top 24 bits of one mt19937_64 draw.
/// Kept explicit so fixtures are identical across standard libraries.
class UniformSource {
public:
    explicit UniformSource(std::uint64_t seed);
    float next(float lo, float hi);

private:
    std::mt19937_64 engine_;
};

}  // namespace attrigraph
