#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "attrigraph/tensor.hpp"

namespace attrigraph {

struct DatasetImage {
    int id = 0;
    int label = 0;
    std::string file;  // relative to the dataset manifest's directory
    Tensor3 pixels;
};

struct Dataset {
    std::string name;
    std::vector<std::string> class_names;
    std::vector<DatasetImage> images;

    std::size_t n_classes() const { return class_names.size(); }
    std::vector<int> labels() const;
    std::vector<int> ids() const;
    /// Number of images per class, indexed by class id.
    std::vector<std::size_t> class_sizes() const;
};

/// Reads dataset.json and every referenced image tensor. Image ids must be
/// unique and labels within [0, n_classes).
Dataset load_dataset(const std::filesystem::path& manifest_path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& manifest_path);

/// Synthetic 16x16x3 corpus: each class is a distinct stripe/checker/blob
/// pattern with a per-image phase jitter and additive noise. Image i has
/// label i % n_classes.
Dataset make_toy_corpus(std::uint64_t seed, std::size_t per_class, std::size_t n_classes = 5);

}  // namespace attrigraph
