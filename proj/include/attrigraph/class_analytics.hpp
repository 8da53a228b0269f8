#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "attrigraph/activation_agg.hpp"

namespace attrigraph {

inline constexpr std::size_t kHistogramBins = 10;
inline constexpr std::size_t kDefaultTopExamples = 10;

/// Cosine similarity of two class rows of A. A zero row has similarity 0
/// with everything, itself included.
double class_similarity(const AggregatedActivations& a, std::size_t class_a, std::size_t class_b);

/// n_classes x n_classes cosine similarities, row-major.
std::vector<double> similarity_matrix(const AggregatedActivations& a);

/// All class ids by descending similarity to `selected`; `selected` comes
/// first, ties go to the lower id.
std::vector<std::size_t> rank_classes(const AggregatedActivations& a, std::size_t selected);

struct ClassSummary {
    std::size_t class_id = 0;
    std::string name;
    double top1_accuracy = 0.0;
    /// Predicted probability of the true class, 10 uniform bins over [0, 1];
    /// a probability of exactly 1 lands in the last bin.
    std::array<std::uint32_t, kHistogramBins> histogram{};
    std::size_t image_count = 0;

    friend bool operator==(const ClassSummary&, const ClassSummary&) = default;
};

/// Top-1 accuracy uses argmax with ties going to the lower class id.
std::vector<ClassSummary> class_summaries(std::span<const TracedImage> corpus,
                                          std::span<const std::string> class_names);

inline constexpr const char* kEmbeddingMethod = "pca-procrustes";

struct ClassEmbedding {
    std::string layer;
    std::string method = kEmbeddingMethod;
    std::vector<std::array<double, 2>> points;  // indexed by class id
};

/// Deterministic 2D class layout per layer: L2-normalised rows of A,
/// centred, projected onto the top two principal axes (each axis flipped so
/// its largest-magnitude loading is positive). Every layer after the first
/// is then rotated/reflected onto its predecessor by orthogonal Procrustes
/// so positions stay comparable across layers.
std::vector<ClassEmbedding> embed_classes(std::span<const AggregatedActivations> layers);

/// Image ids with the k largest values of `channel` in Z, ties to the
/// lower image id.
std::vector<int> top_examples(const ChannelMaxMatrix& z, std::size_t channel, std::size_t k = kDefaultTopExamples);

}  // namespace attrigraph
