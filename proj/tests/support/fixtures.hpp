#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "attrigraph/dataset.hpp"
#include "attrigraph/model.hpp"
#include "attrigraph/pipeline.hpp"

namespace fixture {

namespace fs = std::filesystem;

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = fs::temp_directory_path() / ("attrigraph-" + tag + "-" + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

inline attrigraph::Tensor3 random_tensor(std::mt19937& rng, std::size_t h, std::size_t w, std::size_t c,
                                         float lo = -1.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> u(lo, hi);
    attrigraph::Tensor3 t(h, w, c);
    for (auto& v : t.data) v = u(rng);
    return t;
}

inline attrigraph::Kernel4 random_kernel(std::mt19937& rng, std::size_t kh, std::size_t kw, std::size_t in,
                                         std::size_t out) {
    std::uniform_real_distribution<float> u(-0.5f, 0.5f);
    attrigraph::Kernel4 k(kh, kw, in, out);
    for (auto& v : k.data) v = u(rng);
    return k;
}

inline attrigraph::Map2 random_map(std::mt19937& rng, std::size_t h, std::size_t w, float lo = -1.0f,
                                   float hi = 1.0f) {
    std::uniform_real_distribution<float> u(lo, hi);
    attrigraph::Map2 m(h, w);
    for (auto& v : m.data) v = u(rng);
    return m;
}

/// Seed-0 toy model, 5 classes x `per_class` images, already traced.
struct ToyCorpus {
    attrigraph::ModelManifest model;
    attrigraph::Dataset dataset;
    std::vector<attrigraph::TracedImage> traced;
};

inline ToyCorpus toy_corpus(std::size_t per_class = 20) {
    ToyCorpus t{attrigraph::make_toy_model(0), attrigraph::make_toy_corpus(0, per_class), {}};
    t.traced = attrigraph::trace_corpus(t.model, t.dataset, 1);
    return t;
}

/// Writes the toy model and corpus under `dir`; the config points the bundle at dir/bundle.
inline attrigraph::PipelineConfig write_toy_inputs(const fs::path& dir, std::size_t per_class = 20) {
    attrigraph::save_model(attrigraph::make_toy_model(0), dir / "model" / "model.json", dir / "model" / "weights");
    attrigraph::save_dataset(attrigraph::make_toy_corpus(0, per_class), dir / "data" / "dataset.json");
    attrigraph::PipelineConfig c;
    c.model_manifest = dir / "model" / "model.json";
    c.dataset_manifest = dir / "data" / "dataset.json";
    c.output_dir = dir / "bundle";
    return c;
}

}  // namespace fixture
