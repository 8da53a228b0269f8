#include "doctest.h"

#include <cmath>

#include "attrigraph/class_analytics.hpp"
#include "attrigraph/error.hpp"
#include "support/fixtures.hpp"

using namespace attrigraph;

namespace {

AggregatedActivations make_a(std::size_t classes, std::size_t channels, std::vector<std::uint32_t> counts) {
    AggregatedActivations a;
    a.layer = "L";
    a.n_classes = classes;
    a.n_channels = channels;
    a.counts = std::move(counts);
    return a;
}

TracedImage traced(int id, int label, std::vector<float> p) {
    TracedImage t;
    t.id = id;
    t.label = label;
    t.trace.probabilities = std::move(p);
    return t;
}

}  // namespace

TEST_CASE("cosine similarity and ranking") {
    const auto a = make_a(4, 3, {1, 0, 0,  //
                                 2, 0, 0,  //
                                 1, 1, 0,  //
                                 0, 0, 0});
    CHECK(class_similarity(a, 0, 1) == doctest::Approx(1.0));
    CHECK(class_similarity(a, 0, 2) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(class_similarity(a, 3, 3) == 0.0);
    CHECK(rank_classes(a, 2) == std::vector<std::size_t>{2, 0, 1, 3});
    CHECK(rank_classes(a, 3) == std::vector<std::size_t>{3, 0, 1, 2});
    const auto m = similarity_matrix(a);
    CHECK(m[0 * 4 + 2] == m[2 * 4 + 0]);
    CHECK_THROWS_AS(rank_classes(a, 4), Error);
}

TEST_CASE("selected class leads even when another row is identical") {
    const auto a = make_a(3, 2, {1, 1, 1, 1, 0, 1});
    CHECK(rank_classes(a, 1) == std::vector<std::size_t>{1, 0, 2});
}

TEST_CASE("summaries: argmax ties go low, histogram binning") {
    const std::vector<std::string> names = {"x", "y"};
    const std::vector<TracedImage> corpus = {
        traced(0, 0, {0.5f, 0.5f}),    // tie -> class 0, correct
        traced(1, 0, {0.05f, 0.95f}),  // wrong
        traced(2, 1, {0.0f, 1.0f}),    // p = 1 lands in the last bin
        traced(3, 1, {0.7f, 0.3f}),
    };
    const auto s = class_summaries(corpus, names);
    REQUIRE(s.size() == 2);
    CHECK(s[0].top1_accuracy == 0.5);
    CHECK(s[1].top1_accuracy == 0.5);
    CHECK(s[0].image_count == 2);
    CHECK(s[0].histogram[5] == 1);
    CHECK(s[0].histogram[0] == 1);
    CHECK(s[1].histogram[9] == 1);
    CHECK(s[1].histogram[3] == 1);
    CHECK(s[1].name == "y");
    CHECK_THROWS_AS(class_summaries(std::vector<TracedImage>{traced(0, 0, {1.0f})}, names), Error);
}

TEST_CASE("embedding is deterministic, centred and aligned across layers") {
    const auto a1 = make_a(4, 3, {5, 0, 0, 0, 5, 0, 0, 0, 5, 3, 3, 0});
    auto a2 = a1;
    a2.layer = "M";
    const std::vector<AggregatedActivations> layers = {a1, a2};
    const auto e = embed_classes(layers);
    REQUIRE(e.size() == 2);
    CHECK(e[0].method == std::string("pca-procrustes"));
    double cx = 0.0, cy = 0.0;
    for (const auto& p : e[0].points) {
        cx += p[0];
        cy += p[1];
    }
    CHECK(std::abs(cx) < 1e-9);
    CHECK(std::abs(cy) < 1e-9);
    // identical layers must land on identical coordinates after alignment
    for (std::size_t c = 0; c < 4; ++c) {
        CHECK(e[1].points[c][0] == doctest::Approx(e[0].points[c][0]).epsilon(1e-9));
        CHECK(e[1].points[c][1] == doctest::Approx(e[0].points[c][1]).epsilon(1e-9));
    }
    const auto again = embed_classes(layers);
    CHECK(again[1].points == e[1].points);
    CHECK_THROWS_AS(embed_classes(std::vector<AggregatedActivations>{make_a(1, 2, {1, 1})}), Error);
}

TEST_CASE("top examples, ties to the lower image id") {
    ChannelMaxMatrix z;
    z.layer = "L";
    z.n_images = 4;
    z.n_channels = 2;
    z.values = {1, 0, 3, 0, 3, 0, 2, 0};
    z.image_ids = {10, 12, 11, 13};
    z.labels = {0, 0, 0, 0};
    CHECK(top_examples(z, 0, 3) == std::vector<int>{11, 12, 13});
    CHECK(top_examples(z, 0).size() == 4);
    CHECK_THROWS_AS(top_examples(z, 2, 1), Error);
    CHECK_THROWS_AS(top_examples(z, 0, 0), Error);
}
