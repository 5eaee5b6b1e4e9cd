#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hierlogit/calibration.hpp"
#include "hierlogit/compression.hpp"
#include "hierlogit/dataset.hpp"
#include "hierlogit/detail/parallel.hpp"
#include "hierlogit/detail/rng.hpp"
#include "hierlogit/detail/text.hpp"
#include "hierlogit/hierarchy.hpp"
#include "hierlogit/inference.hpp"
#include "hierlogit/metrics.hpp"

namespace hierlogit {

enum class InferenceMode { Tree, Set };

inline std::string_view to_string(InferenceMode m) { return m == InferenceMode::Tree ? "tree" : "set"; }

inline InferenceMode parse_inference_mode(std::string_view s) {
    if (s == "tree") {
        return InferenceMode::Tree;
    }
    if (s == "set") {
        return InferenceMode::Set;
    }
    throw InvalidArgument("inference mode must be 'tree' or 'set', got '" + std::string(s) + "'");
}

inline HierarchicalPrediction predict(const PosteriorModel& model, const LabelHierarchy* h,
                                      std::span<const double> logits, double threshold, InferenceMode mode) {
    const auto post = terminal_posteriors(model, logits);
    if (mode == InferenceMode::Tree) {
        if (h == nullptr) {
            throw InvalidArgument("tree inference requires a hierarchy");
        }
        return infer_tree(post, *h, threshold);
    }
    return infer_set(post, threshold);
}

inline std::vector<HierarchicalPrediction> predict_all(const PosteriorModel& model, const LabelHierarchy* h,
                                                       const LogitDataset& data, double threshold,
                                                       InferenceMode mode) {
    if (data.num_labels() != model.num_labels()) {
        throw InvalidArgument("dataset has " + std::to_string(data.num_labels()) + " labels, model expects " +
                              std::to_string(model.num_labels()));
    }
    if (h != nullptr && h->terminal_count() != data.num_labels()) {
        throw InvalidArgument("hierarchy terminal count does not match the dataset");
    }
    std::vector<HierarchicalPrediction> out(data.size());
    detail::parallel_for(data.size(),
                         [&](std::size_t k) { out[k] = predict(model, h, data[k].logits, threshold, mode); });
    return out;
}

inline MetricReport evaluate_predictions(std::span<const HierarchicalPrediction> preds, const LogitDataset& data,
                                         double threshold) {
    std::vector<std::size_t> truths, bases;
    truths.reserve(data.size());
    bases.reserve(data.size());
    for (const auto& r : data.records()) {
        truths.push_back(r.ground_truth);
        bases.push_back(argmax_label(r));
    }
    return evaluate(preds, truths, bases, data.num_labels(), threshold);
}

inline MetricReport evaluate_model(const PosteriorModel& model, const LabelHierarchy* h, const LogitDataset& test,
                                   double threshold, InferenceMode mode) {
    return evaluate_predictions(predict_all(model, h, test, threshold, mode), test, threshold);
}

/// Class-wise shuffled orders: order[c] lists class c's record positions in a
/// seeded random order. Subsets of size s take the first s of every order, so
/// smaller subsets are nested in larger ones.
inline std::vector<std::vector<std::size_t>> classwise_shuffle(const LogitDataset& v, std::uint64_t seed) {
    auto by_class = v.indices_by_class();
    detail::Rng rng(seed);
    for (auto& idx : by_class) {
        rng.shuffle(idx);
    }
    return by_class;
}

/// Record positions of the nested subset with `per_class` examples of each
/// class, interleaved class by class.
inline std::vector<std::size_t> nested_subset(const std::vector<std::vector<std::size_t>>& order,
                                              std::size_t per_class) {
    for (std::size_t c = 0; c < order.size(); ++c) {
        if (order[c].size() < per_class) {
            throw InvalidArgument("requested " + std::to_string(per_class) + " examples per class but class " +
                                  std::to_string(c) + " has " + std::to_string(order[c].size()));
        }
    }
    std::vector<std::size_t> out;
    out.reserve(per_class * order.size());
    for (std::size_t k = 0; k < per_class; ++k) {
        for (const auto& idx : order) {
            out.push_back(idx[k]);
        }
    }
    return out;
}

struct SweepConfig {
    std::vector<Scheme> schemes;
    std::vector<std::size_t> sizes;   // validation examples per class
    std::vector<std::size_t> levels;  // ignored by schemes without a level
    double threshold = 0.9;
    InferenceMode mode = InferenceMode::Tree;
    std::uint64_t seed = 0;
    FitOptions fit{};
};

struct SweepRow {
    Scheme scheme = Scheme::Confusion;
    std::size_t val_size = 0;
    std::optional<std::size_t> level;
    MetricReport report;
};

/// Fits and evaluates every (scheme, size, level) grid point. Rows come back
/// in scheme, size, level order regardless of how the grid was scheduled.
inline std::vector<SweepRow> run_sweep(const LogitDataset& validation, const LogitDataset& test,
                                       const LabelHierarchy* h, const SweepConfig& cfg) {
    if (validation.label_names() != test.label_names()) {
        throw InvalidArgument("validation and test label names differ");
    }
    for (std::size_t level : cfg.levels) {
        if (level < 1 || level > validation.num_labels()) {
            throw InvalidArgument("sweep level " + std::to_string(level) + " outside [1, " +
                                  std::to_string(validation.num_labels()) + "]");
        }
    }
    const auto order = classwise_shuffle(validation, cfg.seed);
    std::vector<LogitDataset> subsets;
    for (std::size_t s : cfg.sizes) {
        subsets.push_back(validation.subset(nested_subset(order, s)));
    }
    std::vector<SweepRow> rows;
    std::vector<std::size_t> subset_of;
    for (Scheme scheme : cfg.schemes) {
        for (std::size_t si = 0; si < cfg.sizes.size(); ++si) {
            if (takes_level(scheme)) {
                for (std::size_t level : cfg.levels) {
                    rows.push_back({scheme, cfg.sizes[si], level, {}});
                    subset_of.push_back(si);
                }
            } else {
                rows.push_back({scheme, cfg.sizes[si], std::nullopt, {}});
                subset_of.push_back(si);
            }
        }
    }
    detail::parallel_for(rows.size(), [&](std::size_t r) {
        auto& row = rows[r];
        const auto& v = subsets[subset_of[r]];
        const auto model = fit_estimators(v, fit_compressor(row.scheme, row.level.value_or(0), v, h), cfg.fit);
        row.report = evaluate_model(model, h, test, cfg.threshold, cfg.mode);
    });
    return rows;
}

inline std::string serialize_sweep(std::span<const SweepRow> rows) {
    std::string out = "scheme,val_size,c,topsis,ece\n";
    for (const auto& r : rows) {
        out += std::string(to_string(r.scheme)) + "," + std::to_string(r.val_size) + "," +
               (r.level ? std::to_string(*r.level) : std::string("NA")) + "," + detail::metric_value(r.report.topsis) +
               "," + detail::metric_value(r.report.ece) + "\n";
    }
    return out;
}

}  // namespace hierlogit
