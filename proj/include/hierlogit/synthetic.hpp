#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hierlogit/dataset.hpp"
#include "hierlogit/detail/rng.hpp"
#include "hierlogit/error.hpp"
#include "hierlogit/hierarchy.hpp"
#include "hierlogit/logit_math.hpp"

namespace hierlogit {

/// Gaussian class-conditionals with shared identity covariance and uniform
/// priors. The exact logits are l_j(x) = -|x - mu_j|^2 / 2 + log(1/|C|), so the
/// Bayes posterior is softmax(l). Emitted logits are miscalibrated by
/// z = temperature * l + bias; a temperature-scaling calibrator with the same
/// temperature (and zero bias) would undo the distortion.
struct GeneratorConfig {
    std::vector<std::vector<double>> means;  // one row per class, all the same dimension
    std::vector<std::string> label_names;    // defaults to c0, c1, ...
    std::size_t validation_per_class = 100;
    std::size_t test_per_class = 100;
    double temperature = 1.0;
    std::vector<double> bias;  // empty means zero
};

/// Closed-form posterior for the generator's class-conditionals.
class GaussianBayesOracle {
public:
    explicit GaussianBayesOracle(std::vector<std::vector<double>> means) : means_(std::move(means)) {}

    std::size_t num_labels() const noexcept { return means_.size(); }

    std::vector<double> exact_logits(std::span<const double> x) const {
        const double log_prior = -std::log(static_cast<double>(means_.size()));
        std::vector<double> l(means_.size());
        for (std::size_t j = 0; j < means_.size(); ++j) {
            double d2 = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k) {
                const double d = x[k] - means_[j][k];
                d2 += d * d;
            }
            l[j] = -0.5 * d2 + log_prior;
        }
        return l;
    }

    std::vector<double> posterior(std::span<const double> x) const { return softmax(exact_logits(x)); }

private:
    std::vector<std::vector<double>> means_;
};

struct SyntheticData {
    LogitDataset validation;
    LogitDataset test;
    std::vector<std::vector<double>> validation_oracle;  // Bayes posteriors, row-aligned
    std::vector<std::vector<double>> test_oracle;
    GaussianBayesOracle oracle;
};

inline void validate(const GeneratorConfig& cfg) {
    if (cfg.means.size() < 2) {
        throw InvalidArgument("generator needs at least two classes");
    }
    const std::size_t dim = cfg.means.front().size();
    if (dim == 0) {
        throw InvalidArgument("generator feature dimension must be positive");
    }
    for (const auto& m : cfg.means) {
        if (m.size() != dim) {
            throw InvalidArgument("class means differ in dimension");
        }
    }
    if (cfg.validation_per_class == 0 || cfg.test_per_class == 0) {
        throw InvalidArgument("samples per class must be positive");
    }
    if (!(cfg.temperature > 0.0) || !std::isfinite(cfg.temperature)) {
        throw InvalidArgument("temperature must be positive and finite");
    }
    if (!cfg.bias.empty() && cfg.bias.size() != cfg.means.size()) {
        throw InvalidArgument("bias must have one entry per class");
    }
    if (!cfg.label_names.empty() && cfg.label_names.size() != cfg.means.size()) {
        throw InvalidArgument("label_names must have one entry per class");
    }
}

/// Class means s * e_j in |C| dimensions: every pair equally far apart.
inline std::vector<std::vector<double>> separated_means(std::size_t num_classes, double separation) {
    std::vector<std::vector<double>> means(num_classes, std::vector<double>(num_classes, 0.0));
    for (std::size_t j = 0; j < num_classes; ++j) {
        means[j][j] = separation;
    }
    return means;
}

/// Means that mirror a hierarchy: every non-root node draws an offset from
/// N(0, s_d^2 I) with s_d = scales[depth-1] (last scale reused for deeper
/// nodes); a terminal's mean is the sum of offsets on its ancestral path.
/// Siblings therefore share most of their mean and are confused more often.
inline std::vector<std::vector<double>> hierarchy_means(const LabelHierarchy& h, std::size_t dim,
                                                        std::span<const double> scales, std::uint64_t seed) {
    if (scales.empty() || dim == 0) {
        throw InvalidArgument("hierarchy_means needs a dimension and at least one scale");
    }
    detail::Rng rng(seed);
    std::vector<std::vector<double>> offsets(h.node_count(), std::vector<double>(dim, 0.0));
    for (NodeId v = 0; v < h.node_count(); ++v) {
        if (v == h.root()) {
            continue;
        }
        const double s = scales[std::min(h.depth(v), scales.size()) - 1];
        for (auto& x : offsets[v]) {
            x = s * rng.normal();
        }
    }
    std::vector<std::vector<double>> means(h.terminal_count(), std::vector<double>(dim, 0.0));
    for (std::size_t t = 0; t < h.terminal_count(); ++t) {
        for (NodeId v : ancestral_path(h, t)) {
            for (std::size_t k = 0; k < dim; ++k) {
                means[t][k] += offsets[v][k];
            }
        }
    }
    return means;
}

/// Samples validation and test sets. Records are interleaved by class
/// (class 0, class 1, ..., class 0, ...), so every prefix is near balanced.
inline SyntheticData generate_synthetic(const GeneratorConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    const std::size_t num_classes = cfg.means.size();
    const std::size_t dim = cfg.means.front().size();
    std::vector<std::string> names = cfg.label_names;
    if (names.empty()) {
        for (std::size_t j = 0; j < num_classes; ++j) {
            names.push_back("c" + std::to_string(j));
        }
    }
    GaussianBayesOracle oracle(cfg.means);
    detail::Rng rng(seed);

    auto draw = [&](std::size_t per_class, LogitDataset& out, std::vector<std::vector<double>>& posts) {
        std::vector<double> x(dim);
        for (std::size_t k = 0; k < per_class; ++k) {
            for (std::size_t j = 0; j < num_classes; ++j) {
                for (std::size_t d = 0; d < dim; ++d) {
                    x[d] = cfg.means[j][d] + rng.normal();
                }
                auto exact = oracle.exact_logits(x);
                posts.push_back(softmax(exact));
                LogitRecord rec;
                rec.ground_truth = j;
                rec.logits.resize(num_classes);
                for (std::size_t c = 0; c < num_classes; ++c) {
                    rec.logits[c] = cfg.temperature * exact[c] + (cfg.bias.empty() ? 0.0 : cfg.bias[c]);
                }
                out.add(std::move(rec));
            }
        }
    };

    SyntheticData data{LogitDataset(names), LogitDataset(names), {}, {}, oracle};
    draw(cfg.validation_per_class, data.validation, data.validation_oracle);
    draw(cfg.test_per_class, data.test, data.test_oracle);
    return data;
}

}  // namespace hierlogit
