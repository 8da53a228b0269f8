#include "attrigraph/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "attrigraph/error.hpp"
#include "attrigraph/io_formats.hpp"
#include "attrigraph/model.hpp"
#include "json.hpp"

namespace attrigraph {

using json = nlohmann::json;

std::vector<int> Dataset::labels() const {
    std::vector<int> out;
    out.reserve(images.size());
    for (const auto& img : images) out.push_back(img.label);
    return out;
}

std::vector<int> Dataset::ids() const {
    std::vector<int> out;
    out.reserve(images.size());
    for (const auto& img : images) out.push_back(img.id);
    return out;
}

std::vector<std::size_t> Dataset::class_sizes() const {
    std::vector<std::size_t> out(n_classes(), 0);
    for (const auto& img : images) ++out[static_cast<std::size_t>(img.label)];
    return out;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
    json doc;
    try {
        doc = json::parse(read_text_file(manifest_path));
    } catch (const json::exception& e) {
        throw FormatError(manifest_path.string() + ": " + e.what());
    }
    const auto dir = manifest_path.parent_path();

    Dataset ds;
    try {
        ds.name = doc.at("name").get<std::string>();
        ds.class_names = doc.at("classes").get<std::vector<std::string>>();
        std::set<int> seen;
        for (const auto& ji : doc.at("images")) {
            DatasetImage img;
            img.id = ji.at("id").get<int>();
            img.label = ji.at("label").get<int>();
            img.file = ji.at("file").get<std::string>();
            if (!seen.insert(img.id).second) {
                throw Error(ErrorKind::invalid_argument, "duplicate image id " + std::to_string(img.id));
            }
            if (img.label < 0 || static_cast<std::size_t>(img.label) >= ds.class_names.size()) {
                throw Error(ErrorKind::invalid_argument, "image " + std::to_string(img.id) + " has label " +
                                                             std::to_string(img.label) + " outside the " +
                                                             std::to_string(ds.class_names.size()) + " classes");
            }
            img.pixels = read_tensor3(dir / img.file);
            ds.images.push_back(std::move(img));
        }
    } catch (const json::exception& e) {
        throw FormatError(manifest_path.string() + ": " + e.what());
    }
    if (ds.images.empty()) {
        throw Error(ErrorKind::invalid_argument, manifest_path.string() + ": dataset has no images");
    }
    return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& manifest_path) {
    const auto dir = manifest_path.parent_path();
    json doc;
    doc["schema"] = 1;
    doc["name"] = dataset.name;
    doc["classes"] = dataset.class_names;
    json images = json::array();
    for (const auto& img : dataset.images) {
        write_tensor(dir / img.file, to_raw(img.pixels));
        images.push_back({{"id", img.id}, {"label", img.label}, {"file", img.file}});
    }
    doc["images"] = std::move(images);
    write_text_file(manifest_path, doc.dump(2) + "\n");
}

namespace {

constexpr float kPi = 3.14159265358979f;

// Pattern intensity in [0, 1] for class pattern `kind` at pixel (r, c).
float pattern(std::size_t kind, float r, float c, float phase) {
    switch (kind % 5) {
        case 0: return 0.5f + 0.5f * std::sin(2.0f * kPi * (r + phase) / 4.0f);
        case 1: return 0.5f + 0.5f * std::sin(2.0f * kPi * (c + phase) / 4.0f);
        case 2: {
            const int a = static_cast<int>(std::floor((r + phase) / 4.0f));
            const int b = static_cast<int>(std::floor((c + phase) / 4.0f));
            return ((a + b) % 2 == 0) ? 1.0f : 0.0f;
        }
        case 3: {
            const float cr = 7.5f + phase - 2.0f;
            const float cc = 7.5f - phase + 2.0f;
            const float d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
            return std::exp(-d2 / 18.0f);
        }
        default: return 0.5f + 0.5f * std::sin(2.0f * kPi * (r + c + phase) / 6.0f);
    }
}

}  // namespace

Dataset make_toy_corpus(std::uint64_t seed, std::size_t per_class, std::size_t n_classes) {
    static const char* kNames[] = {"hstripes", "vstripes", "checker", "blob", "diagonal"};
    UniformSource rng(seed ^ 0x9e3779b97f4a7c15ULL);

    Dataset ds;
    ds.name = "toy-patterns";
    for (std::size_t c = 0; c < n_classes; ++c) {
        std::string name = kNames[c % 5];
        if (c >= 5) name += "_" + std::to_string(c / 5);
        ds.class_names.push_back(std::move(name));
    }

    const std::size_t total = per_class * n_classes;
    for (std::size_t i = 0; i < total; ++i) {
        const std::size_t label = i % n_classes;
        DatasetImage img;
        img.id = static_cast<int>(i);
        img.label = static_cast<int>(label);
        char file[48];
        std::snprintf(file, sizeof file, "images/img_%05zu.atg", i);
        img.file = file;
        img.pixels = Tensor3(16, 16, 3);

        const float phase = rng.next(0.0f, 4.0f);
        // Each class favours one colour channel; classes past the fifth
        // rotate the favoured channel.
        const std::size_t hot = (label + label / 5) % 3;
        for (std::size_t r = 0; r < 16; ++r) {
            for (std::size_t col = 0; col < 16; ++col) {
                const float v = pattern(label, static_cast<float>(r), static_cast<float>(col), phase);
                for (std::size_t ch = 0; ch < 3; ++ch) {
                    const float gain = ch == hot ? 0.8f : 0.3f;
                    const float noise = rng.next(-0.1f, 0.1f);
                    img.pixels.at(r, col, ch) = std::clamp(gain * v + noise, 0.0f, 1.0f);
                }
            }
        }
        ds.images.push_back(std::move(img));
    }
    return ds;
}

}  // namespace attrigraph
