#include "attrigraph/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "attrigraph/error.hpp"
#include "attrigraph/io_formats.hpp"
#include "json.hpp"

namespace attrigraph {

using json = nlohmann::json;

std::size_t PrimaryLayer::out_channels() const {
    std::size_t total = 0;
    for (const auto& b : branches) {
        total += b.out_channels();
    }
    return total;
}

std::optional<std::size_t> ModelManifest::layer_index(const std::string& layer_name) const {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].name == layer_name) return l;
    }
    return std::nullopt;
}

std::size_t ModelManifest::input_channels(std::size_t l) const {
    return l == 0 ? input.channels : layers[l - 1].out_channels();
}

namespace {

std::string where(const PrimaryLayer& layer, std::size_t b) {
    return "layer '" + layer.name + "' branch " + std::to_string(b);
}

}  // namespace

void validate_model(const ModelManifest& model) {
    if (model.input.height == 0 || model.input.width == 0 || model.input.channels == 0) {
        throw Error(ErrorKind::invalid_argument, "model '" + model.name + "' has empty input dims");
    }
    if (model.layers.size() < 2) {
        throw Error(ErrorKind::invalid_argument, "model '" + model.name + "' needs at least 2 primary layers, has " +
                                                     std::to_string(model.layers.size()));
    }

    std::size_t h = model.input.height;
    std::size_t w = model.input.width;
    std::vector<std::string> seen;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        if (layer.name.empty()) {
            throw Error(ErrorKind::invalid_argument, "layer " + std::to_string(l) + " has no name");
        }
        if (std::find(seen.begin(), seen.end(), layer.name) != seen.end()) {
            throw Error(ErrorKind::invalid_argument, "duplicate layer name '" + layer.name + "'");
        }
        seen.push_back(layer.name);
        if (layer.branches.empty()) {
            throw Error(ErrorKind::invalid_argument, "layer '" + layer.name + "' has no branches");
        }

        const std::size_t in_ch = model.input_channels(l);
        const std::size_t total = layer.out_channels();
        std::vector<int> covered(total, 0);
        for (std::size_t b = 0; b < layer.branches.size(); ++b) {
            const auto& branch = layer.branches[b];
            if (branch.steps.empty() || branch.steps.size() > 2) {
                throw Error(ErrorKind::invalid_argument,
                            where(layer, b) + " has " + std::to_string(branch.steps.size()) + " steps, expected 1 or 2");
            }
            std::size_t expect_in = in_ch;
            for (std::size_t s = 0; s < branch.steps.size(); ++s) {
                const auto& step = branch.steps[s];
                try {
                    step.kernel.validate();
                } catch (const Error& e) {
                    throw Error(ErrorKind::shape_mismatch, where(layer, b) + " step " + std::to_string(s) + ": " + e.what());
                }
                if (step.in_channels() != expect_in) {
                    throw Error(ErrorKind::shape_mismatch,
                                where(layer, b) + " step " + std::to_string(s) + " expects " +
                                    std::to_string(step.in_channels()) + " input channels, receives " +
                                    std::to_string(expect_in));
                }
                if (!step.bias.empty() && step.bias.size() != step.out_channels()) {
                    throw Error(ErrorKind::shape_mismatch,
                                where(layer, b) + " step " + std::to_string(s) + " bias has " +
                                    std::to_string(step.bias.size()) + " entries for " +
                                    std::to_string(step.out_channels()) + " channels");
                }
                expect_in = step.out_channels();
            }
            if (branch.channel_offset + branch.out_channels() > total) {
                throw Error(ErrorKind::shape_mismatch,
                            where(layer, b) + " channels [" + std::to_string(branch.channel_offset) + ", " +
                                std::to_string(branch.channel_offset + branch.out_channels()) +
                                ") fall outside the layer's " + std::to_string(total) + " channels");
            }
            for (std::size_t c = 0; c < branch.out_channels(); ++c) {
                ++covered[branch.channel_offset + c];
            }
        }
        for (std::size_t c = 0; c < total; ++c) {
            if (covered[c] != 1) {
                throw Error(ErrorKind::shape_mismatch,
                            "layer '" + layer.name + "' channel " + std::to_string(c) + " is covered by " +
                                std::to_string(covered[c]) + " branches, expected exactly 1");
            }
        }
        if (layer.pool) {
            if (h % 2 != 0 || w % 2 != 0) {
                throw Error(ErrorKind::shape_mismatch, "layer '" + layer.name + "' pools odd spatial dims " +
                                                           std::to_string(h) + "x" + std::to_string(w));
            }
            h /= 2;
            w /= 2;
        }
    }

    const std::size_t last = model.layers.back().out_channels();
    if (model.head.weights.height == 0 || model.head.weights.width != last ||
        model.head.weights.data.size() != model.head.weights.height * model.head.weights.width) {
        throw Error(ErrorKind::shape_mismatch,
                    "head weights " + std::to_string(model.head.weights.height) + "x" +
                        std::to_string(model.head.weights.width) + " do not match last layer's " +
                        std::to_string(last) + " channels");
    }
    if (!model.head.bias.empty() && model.head.bias.size() != model.head.n_classes()) {
        throw Error(ErrorKind::shape_mismatch, "head bias has " + std::to_string(model.head.bias.size()) +
                                                   " entries for " + std::to_string(model.head.n_classes()) +
                                                   " classes");
    }
}

namespace {

std::string step_file(const std::string& layer, std::size_t b, std::size_t s, const char* what) {
    return layer + ".b" + std::to_string(b) + ".s" + std::to_string(s) + "." + what + ".atg";
}

template <class F>
auto load_named(const std::string& context, F&& f) {
    try {
        return f();
    } catch (const FormatError& e) {
        throw FormatError(context + ": " + e.what(), e.offset());
    } catch (const Error& e) {
        throw Error(e.kind(), context + ": " + e.what());
    }
}

}  // namespace

ModelManifest load_model(const std::filesystem::path& manifest_path, const std::filesystem::path& weights_dir) {
    json doc;
    try {
        doc = json::parse(read_text_file(manifest_path));
    } catch (const json::exception& e) {
        throw FormatError(manifest_path.string() + ": " + e.what());
    }

    ModelManifest model;
    try {
        model.name = doc.at("name").get<std::string>();
        const auto& in = doc.at("input");
        model.input = {in.at("height").get<std::size_t>(), in.at("width").get<std::size_t>(),
                       in.at("channels").get<std::size_t>()};

        for (const auto& jl : doc.at("layers")) {
            PrimaryLayer layer;
            layer.name = jl.at("name").get<std::string>();
            layer.pool = jl.value("pool", false);
            std::size_t b = 0;
            for (const auto& jb : jl.at("branches")) {
                Branch branch;
                branch.channel_offset = jb.at("channel_offset").get<std::size_t>();
                std::size_t s = 0;
                for (const auto& js : jb.at("steps")) {
                    ConvStep step;
                    const std::string ctx = where(layer, b) + " step " + std::to_string(s);
                    const auto kernel_file = js.at("kernel").get<std::string>();
                    step.kernel = load_named(ctx, [&] { return read_kernel4(weights_dir / kernel_file); });
                    if (js.contains("bias") && !js.at("bias").is_null()) {
                        const auto bias_file = js.at("bias").get<std::string>();
                        step.bias = load_named(ctx, [&] { return read_vector(weights_dir / bias_file); });
                    }
                    step.relu = js.value("relu", true);
                    branch.steps.push_back(std::move(step));
                    ++s;
                }
                layer.branches.push_back(std::move(branch));
                ++b;
            }
            model.layers.push_back(std::move(layer));
        }

        const auto& jh = doc.at("head");
        const auto weights_file = jh.at("weights").get<std::string>();
        model.head.weights = load_named("head", [&] { return read_map2(weights_dir / weights_file); });
        if (jh.contains("bias") && !jh.at("bias").is_null()) {
            const auto bias_file = jh.at("bias").get<std::string>();
            model.head.bias = load_named("head", [&] { return read_vector(weights_dir / bias_file); });
        }
        if (jh.contains("classes") && jh.at("classes").get<std::size_t>() != model.head.n_classes()) {
            throw Error(ErrorKind::shape_mismatch,
                        "head declares " + std::to_string(jh.at("classes").get<std::size_t>()) +
                            " classes, weights have " + std::to_string(model.head.n_classes()));
        }
    } catch (const json::exception& e) {
        throw FormatError(manifest_path.string() + ": " + e.what());
    }

    validate_model(model);
    return model;
}

void save_model(const ModelManifest& model, const std::filesystem::path& manifest_path,
                const std::filesystem::path& weights_dir) {
    validate_model(model);
    json doc;
    doc["schema"] = 1;
    doc["name"] = model.name;
    doc["input"] = {{"height", model.input.height}, {"width", model.input.width}, {"channels", model.input.channels}};
    json layers = json::array();
    for (const auto& layer : model.layers) {
        json jl;
        jl["name"] = layer.name;
        jl["pool"] = layer.pool;
        json branches = json::array();
        for (std::size_t b = 0; b < layer.branches.size(); ++b) {
            const auto& branch = layer.branches[b];
            json steps = json::array();
            for (std::size_t s = 0; s < branch.steps.size(); ++s) {
                const auto& step = branch.steps[s];
                json js;
                js["kernel"] = step_file(layer.name, b, s, "kernel");
                write_tensor(weights_dir / js["kernel"].get<std::string>(), to_raw(step.kernel));
                if (step.bias.empty()) {
                    js["bias"] = nullptr;
                } else {
                    js["bias"] = step_file(layer.name, b, s, "bias");
                    write_tensor(weights_dir / js["bias"].get<std::string>(), to_raw(std::span<const float>(step.bias)));
                }
                js["relu"] = step.relu;
                steps.push_back(std::move(js));
            }
            branches.push_back({{"channel_offset", branch.channel_offset}, {"steps", std::move(steps)}});
        }
        jl["branches"] = std::move(branches);
        layers.push_back(std::move(jl));
    }
    doc["layers"] = std::move(layers);

    json head;
    head["classes"] = model.head.n_classes();
    head["weights"] = "head.weights.atg";
    write_tensor(weights_dir / "head.weights.atg", to_raw(model.head.weights));
    if (model.head.bias.empty()) {
        head["bias"] = nullptr;
    } else {
        head["bias"] = "head.bias.atg";
        write_tensor(weights_dir / "head.bias.atg", to_raw(std::span<const float>(model.head.bias)));
    }
    doc["head"] = std::move(head);
    write_text_file(manifest_path, doc.dump(2) + "\n");
}

Tensor3 run_step(const ConvStep& step, const Tensor3& x) {
    Tensor3 y = conv2d_full(x, step.kernel, step.bias);
    return step.relu ? relu(y) : y;
}

ForwardTrace forward(const ModelManifest& model, const Tensor3& image) {
    if (image.height != model.input.height || image.width != model.input.width ||
        image.channels != model.input.channels) {
        throw Error(ErrorKind::shape_mismatch,
                    "image " + image.shape_string() + " does not match model input " +
                        std::to_string(model.input.height) + "x" + std::to_string(model.input.width) + "x" +
                        std::to_string(model.input.channels));
    }

    ForwardTrace trace;
    trace.layers.reserve(model.layers.size());
    const Tensor3* x = &image;
    for (const auto& layer : model.layers) {
        LayerTrace lt;
        lt.inner.resize(layer.branches.size());
        Tensor3 out(x->height, x->width, layer.out_channels());
        for (std::size_t b = 0; b < layer.branches.size(); ++b) {
            const auto& branch = layer.branches[b];
            Tensor3 y = run_step(branch.steps[0], *x);
            if (branch.steps.size() == 2) {
                Tensor3 z = run_step(branch.steps[1], y);
                lt.inner[b] = std::move(y);
                y = std::move(z);
            }
            for (std::size_t p = 0; p < y.height * y.width; ++p) {
                std::copy_n(&y.data[p * y.channels], y.channels, &out.data[p * out.channels + branch.channel_offset]);
            }
        }
        lt.output = layer.pool ? maxpool2(out) : std::move(out);
        trace.layers.push_back(std::move(lt));
        x = &trace.layers.back().output;
    }

    const auto pooled = channel_max(trace.layers.back().output);
    const auto& head = model.head;
    std::vector<double> logits(head.n_classes());
    for (std::size_t c = 0; c < head.n_classes(); ++c) {
        double acc = head.bias.empty() ? 0.0 : head.bias[c];
        for (std::size_t ch = 0; ch < pooled.size(); ++ch) {
            acc += static_cast<double>(head.weights.at(c, ch)) * pooled[ch];
        }
        logits[c] = acc;
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double& v : logits) {
        v = std::exp(v - top);
        denom += v;
    }
    trace.probabilities.resize(logits.size());
    for (std::size_t c = 0; c < logits.size(); ++c) {
        trace.probabilities[c] = static_cast<float>(logits[c] / denom);
    }
    return trace;
}

UniformSource::UniformSource(std::uint64_t seed) : engine_(seed) {}

float UniformSource::next(float lo, float hi) {
    const auto bits = static_cast<std::uint32_t>(engine_() >> 40);  // top 24 bits
    const double u = static_cast<double>(bits) / 16777216.0;
    return static_cast<float>(lo + (static_cast<double>(hi) - lo) * u);
}

namespace {

constexpr float kToyWeightRange = 0.5f;
constexpr float kToyBiasRange = 0.05f;

ConvStep random_step(UniformSource& rng, std::size_t k, std::size_t in, std::size_t out) {
    ConvStep step;
    step.kernel = Kernel4(k, k, in, out);
    for (float& v : step.kernel.data) v = rng.next(-kToyWeightRange, kToyWeightRange);
    step.bias.resize(out);
    for (float& v : step.bias) v = rng.next(-kToyBiasRange, kToyBiasRange);
    step.relu = true;
    return step;
}

PrimaryLayer toy_layer(UniformSource& rng, const std::string& name, std::size_t in, std::size_t direct,
                       std::size_t reduce, std::size_t expand) {
    PrimaryLayer layer;
    layer.name = name;
    layer.pool = true;

    Branch one;
    one.channel_offset = 0;
    one.steps.push_back(random_step(rng, 1, in, direct));

    Branch two;
    two.channel_offset = direct;
    two.steps.push_back(random_step(rng, 1, in, reduce));
    two.steps.push_back(random_step(rng, 3, reduce, expand));

    layer.branches.push_back(std::move(one));
    layer.branches.push_back(std::move(two));
    return layer;
}

}  // namespace

ModelManifest make_toy_model(std::uint64_t seed) {
    UniformSource rng(seed);
    ModelManifest model;
    model.name = "toy-mixed";
    model.input = {16, 16, 3};
    model.layers.push_back(toy_layer(rng, "mixA", 3, 6, 4, 6));
    model.layers.push_back(toy_layer(rng, "mixB", 12, 8, 4, 8));

    constexpr std::size_t kClasses = 5;
    model.head.weights = Map2(kClasses, model.layers.back().out_channels());
    for (float& v : model.head.weights.data) v = rng.next(-kToyWeightRange, kToyWeightRange);
    model.head.bias.resize(kClasses);
    for (float& v : model.head.bias) v = rng.next(-kToyBiasRange, kToyBiasRange);

    validate_model(model);
    return model;
}

}  // namespace attrigraph
