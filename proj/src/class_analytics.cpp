#include "attrigraph/class_analytics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "attrigraph/error.hpp"

namespace attrigraph {

double class_similarity(const AggregatedActivations& a, std::size_t class_a, std::size_t class_b) {
    if (class_a >= a.n_classes || class_b >= a.n_classes) {
        throw Error(ErrorKind::index_out_of_range, "class pair (" + std::to_string(class_a) + ", " +
                                                       std::to_string(class_b) + ") outside " +
                                                       std::to_string(a.n_classes) + " classes");
    }
    const auto ra = a.row(class_a);
    const auto rb = a.row(class_b);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < a.n_channels; ++j) {
        const double x = ra[j];
        const double y = rb[j];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<double> similarity_matrix(const AggregatedActivations& a) {
    std::vector<double> out(a.n_classes * a.n_classes);
    for (std::size_t x = 0; x < a.n_classes; ++x) {
        for (std::size_t y = x; y < a.n_classes; ++y) {
            const double s = class_similarity(a, x, y);
            out[x * a.n_classes + y] = s;
            out[y * a.n_classes + x] = s;
        }
    }
    return out;
}

std::vector<std::size_t> rank_classes(const AggregatedActivations& a, std::size_t selected) {
    if (selected >= a.n_classes) {
        throw Error(ErrorKind::index_out_of_range,
                    "class " + std::to_string(selected) + " outside " + std::to_string(a.n_classes) + " classes");
    }
    std::vector<double> sim(a.n_classes);
    for (std::size_t c = 0; c < a.n_classes; ++c) sim[c] = class_similarity(a, selected, c);

    std::vector<std::size_t> order;
    order.push_back(selected);
    for (std::size_t c = 0; c < a.n_classes; ++c) {
        if (c != selected) order.push_back(c);
    }
    std::stable_sort(order.begin() + 1, order.end(), [&](std::size_t x, std::size_t y) { return sim[x] > sim[y]; });
    return order;
}

std::vector<ClassSummary> class_summaries(std::span<const TracedImage> corpus,
                                          std::span<const std::string> class_names) {
    const std::size_t n_classes = class_names.size();
    std::vector<ClassSummary> out(n_classes);
    std::vector<std::size_t> correct(n_classes, 0);
    for (std::size_t c = 0; c < n_classes; ++c) {
        out[c].class_id = c;
        out[c].name = class_names[c];
    }
    for (const auto& img : corpus) {
        const auto& p = img.trace.probabilities;
        if (p.size() != n_classes) {
            throw Error(ErrorKind::shape_mismatch, "image " + std::to_string(img.id) + " has " +
                                                       std::to_string(p.size()) + " probabilities for " +
                                                       std::to_string(n_classes) + " classes");
        }
        if (img.label < 0 || static_cast<std::size_t>(img.label) >= n_classes) {
            throw Error(ErrorKind::invalid_argument,
                        "image " + std::to_string(img.id) + " has label " + std::to_string(img.label));
        }
        const auto c = static_cast<std::size_t>(img.label);
        // max_element returns the first maximum, i.e. the lower class id on ties.
        const auto predicted = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
        if (predicted == c) ++correct[c];
        const double prob = std::clamp(static_cast<double>(p[c]), 0.0, 1.0);
        const auto bin = std::min<std::size_t>(kHistogramBins - 1, static_cast<std::size_t>(prob * kHistogramBins));
        ++out[c].histogram[bin];
        ++out[c].image_count;
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
        out[c].top1_accuracy =
            out[c].image_count == 0 ? 0.0 : static_cast<double>(correct[c]) / static_cast<double>(out[c].image_count);
    }
    return out;
}

namespace {

using Eigen::MatrixXd;

MatrixXd normalized_centered_rows(const AggregatedActivations& a) {
    MatrixXd m(static_cast<Eigen::Index>(a.n_classes), static_cast<Eigen::Index>(a.n_channels));
    for (std::size_t c = 0; c < a.n_classes; ++c) {
        const auto row = a.row(c);
        double norm = 0.0;
        for (auto v : row) norm += static_cast<double>(v) * v;
        norm = std::sqrt(norm);
        for (std::size_t j = 0; j < a.n_channels; ++j) {
            m(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) = norm > 0.0 ? row[j] / norm : 0.0;
        }
    }
    const Eigen::RowVectorXd mean = m.colwise().mean();
    m.rowwise() -= mean;
    return m;
}

// n x 2 principal-component scores.
MatrixXd pca2(const MatrixXd& centered) {
    const auto n = centered.rows();
    MatrixXd coords = MatrixXd::Zero(n, 2);
    if (centered.cols() == 0) return coords;

    Eigen::JacobiSVD<MatrixXd> svd(centered, Eigen::ComputeThinV);
    const MatrixXd& v = svd.matrixV();
    for (Eigen::Index axis = 0; axis < std::min<Eigen::Index>(2, v.cols()); ++axis) {
        Eigen::VectorXd dir = v.col(axis);
        Eigen::Index lead = 0;
        for (Eigen::Index j = 1; j < dir.size(); ++j) {
            if (std::abs(dir(j)) > std::abs(dir(lead))) lead = j;
        }
        if (dir(lead) < 0.0) dir = -dir;
        coords.col(axis) = centered * dir;
    }
    return coords;
}

// Orthogonal R minimising ||current * R - previous||_F.
MatrixXd procrustes(const MatrixXd& current, const MatrixXd& previous) {
    const MatrixXd cross = current.transpose() * previous;
    Eigen::JacobiSVD<MatrixXd> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace

std::vector<ClassEmbedding> embed_classes(std::span<const AggregatedActivations> layers) {
    std::vector<ClassEmbedding> out;
    MatrixXd previous;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& a = layers[l];
        if (a.n_classes < 2) {
            throw Error(ErrorKind::invalid_argument,
                        "embedding layer '" + a.layer + "' needs at least 2 classes, has " + std::to_string(a.n_classes));
        }
        MatrixXd coords = pca2(normalized_centered_rows(a));
        if (l > 0 && previous.rows() == coords.rows()) {
            coords = coords * procrustes(coords, previous);
        }
        ClassEmbedding e;
        e.layer = a.layer;
        e.points.resize(a.n_classes);
        for (std::size_t c = 0; c < a.n_classes; ++c) {
            e.points[c] = {coords(static_cast<Eigen::Index>(c), 0), coords(static_cast<Eigen::Index>(c), 1)};
        }
        out.push_back(std::move(e));
        previous = std::move(coords);
    }
    return out;
}

std::vector<int> top_examples(const ChannelMaxMatrix& z, std::size_t channel, std::size_t k) {
    if (k == 0) {
        throw Error(ErrorKind::invalid_argument, "top_examples: k must be at least 1");
    }
    if (channel >= z.n_channels) {
        throw Error(ErrorKind::index_out_of_range, "channel " + std::to_string(channel) + " outside layer '" +
                                                       z.layer + "' with " + std::to_string(z.n_channels) +
                                                       " channels");
    }
    std::vector<std::size_t> rows(z.n_images);
    std::iota(rows.begin(), rows.end(), 0);
    std::sort(rows.begin(), rows.end(), [&](std::size_t x, std::size_t y) {
        const float vx = z.at(x, channel);
        const float vy = z.at(y, channel);
        if (vx != vy) return vx > vy;
        return z.image_ids[x] < z.image_ids[y];
    });
    rows.resize(std::min(k, rows.size()));
    std::vector<int> ids;
    ids.reserve(rows.size());
    for (auto r : rows) ids.push_back(z.image_ids[r]);
    return ids;
}

}  // namespace attrigraph
