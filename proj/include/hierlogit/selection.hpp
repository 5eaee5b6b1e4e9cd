#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hierlogit/calibration.hpp"
#include "hierlogit/compression.hpp"
#include "hierlogit/dataset.hpp"
#include "hierlogit/detail/parallel.hpp"
#include "hierlogit/detail/rng.hpp"
#include "hierlogit/experiment.hpp"
#include "hierlogit/metrics.hpp"

namespace hierlogit {

struct SelectionOptions {
    Scheme scheme = Scheme::Confusion;
    double threshold = 0.9;
    InferenceMode mode = InferenceMode::Tree;
    std::optional<std::size_t> folds;  // k-fold approximation instead of leave-one-out
    std::uint64_t seed = 0;            // fold assignment in k-fold mode
    FitOptions fit{};
};

struct LevelScore {
    std::size_t level = 0;
    MetricReport report;  // over all held-out predictions
};

struct LevelSearchResult {
    std::vector<LevelScore> scores;  // ascending level
    std::size_t chosen = 0;
    bool approximate = false;
    std::size_t folds = 0;  // 0 for leave-one-out
};

/// 1 .. min(|C|, smallest per-class count).
inline std::vector<std::size_t> default_level_candidates(const LogitDataset& v) {
    std::size_t smallest = v.size();
    for (const auto& idx : v.indices_by_class()) {
        smallest = std::min(smallest, idx.size());
    }
    std::vector<std::size_t> out;
    for (std::size_t c = 1; c <= std::min(v.num_labels(), smallest); ++c) {
        out.push_back(c);
    }
    return out;
}

/// Highest TOPSIS wins; ties and missing scores go to the smaller level.
inline std::size_t choose_level(std::span<const LevelScore> scores) {
    if (scores.empty()) {
        throw InvalidArgument("no candidate levels");
    }
    const LevelScore* best = &scores.front();
    for (const auto& s : scores) {
        const bool better = s.report.topsis && (!best->report.topsis || *s.report.topsis > *best->report.topsis);
        const bool tie_smaller = s.report.topsis == best->report.topsis && s.level < best->level;
        if (better || tie_smaller) {
            best = &s;
        }
    }
    return best->level;
}

namespace detail {

inline std::vector<std::size_t> all_but(std::size_t size, std::span<const std::size_t> excluded_sorted) {
    std::vector<std::size_t> out;
    out.reserve(size);
    for (std::size_t k = 0; k < size; ++k) {
        if (!std::binary_search(excluded_sorted.begin(), excluded_sorted.end(), k)) {
            out.push_back(k);
        }
    }
    return out;
}

}  // namespace detail

/// Picks the compression level by class-wise cross validation on `v`.
///
/// Leave-one-out holds out each record in turn (class by class), refits on
/// the rest and predicts the held-out record. For row-local schemes only the
/// estimator row of the held-out record's base prediction can change, so just
/// that row is refitted; the result equals a full refit. All held-out
/// predictions of a level feed one metric report.
inline LevelSearchResult loocv_select(const LogitDataset& v, const LabelHierarchy* h,
                                      std::span<const std::size_t> candidates, const SelectionOptions& opt) {
    if (!takes_level(opt.scheme)) {
        throw InvalidArgument("scheme '" + std::string(to_string(opt.scheme)) + "' has no compression level to select");
    }
    const auto by_class = v.indices_by_class();
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        if (by_class[c].size() < 2) {
            throw InvalidArgument("class '" + v.label_names()[c] + "' has fewer than two validation examples");
        }
    }
    std::vector<std::size_t> levels(candidates.begin(), candidates.end());
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    if (levels.empty()) {
        throw InvalidArgument("no candidate levels");
    }
    if (levels.front() < 1 || levels.back() > v.num_labels()) {
        throw InvalidArgument("candidate levels must lie in [1, " + std::to_string(v.num_labels()) + "]");
    }
    if (opt.folds && *opt.folds < 2) {
        throw InvalidArgument("k-fold selection needs at least two folds");
    }
    if (opt.mode == InferenceMode::Tree && h == nullptr) {
        throw InvalidArgument("tree inference requires a hierarchy");
    }

    // Held-out groups: singletons for leave-one-out, stratified folds otherwise.
    std::vector<std::vector<std::size_t>> groups;
    if (opt.folds) {
        groups.resize(*opt.folds);
        detail::Rng rng(opt.seed);
        for (auto idx : by_class) {
            rng.shuffle(idx);
            for (std::size_t m = 0; m < idx.size(); ++m) {
                groups[m % *opt.folds].push_back(idx[m]);
            }
        }
        for (auto& g : groups) {
            std::sort(g.begin(), g.end());
        }
        std::erase_if(groups, [](const auto& g) { return g.empty(); });
    } else {
        for (const auto& idx : by_class) {
            for (std::size_t k : idx) {
                groups.push_back({k});
            }
        }
    }

    LevelSearchResult result;
    result.approximate = opt.folds.has_value();
    result.folds = opt.folds.value_or(0);
    const auto parts = partition_by_prediction(v);
    std::vector<std::size_t> base(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        base[k] = argmax_label(v[k]);
    }

    for (std::size_t level : levels) {
        const bool row_local = !opt.folds && is_row_local(opt.scheme);
        std::optional<PosteriorModel> full;
        if (row_local) {
            full = fit_estimators(v, fit_compressor(opt.scheme, level, v, h), opt.fit);
        }
        std::vector<std::vector<HierarchicalPrediction>> held_out(groups.size());
        detail::parallel_for(groups.size(), [&](std::size_t g) {
            const auto& group = groups[g];
            const auto train = v.subset(detail::all_but(v.size(), group));
            std::optional<PosteriorModel> model;
            if (row_local) {
                const std::size_t x = group.front();
                const std::size_t i = base[x];
                model = *full;
                model->set_compressor(fit_compressor(opt.scheme, level, train, h));
                std::vector<std::size_t> rest;
                for (std::size_t k : parts[i]) {
                    if (k != x) {
                        rest.push_back(k);
                    }
                }
                if (rest.empty()) {
                    model->set_fallback(i);
                } else {
                    model->set_row(i, fit_estimator_row(v, rest, model->compressor(), i, opt.fit), rest.size());
                }
            } else {
                model = fit_estimators(train, fit_compressor(opt.scheme, level, train, h), opt.fit);
            }
            for (std::size_t k : group) {
                held_out[g].push_back(predict(*model, h, v[k].logits, opt.threshold, opt.mode));
            }
        });
        std::vector<HierarchicalPrediction> preds;
        std::vector<std::size_t> truths, bases;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            for (std::size_t m = 0; m < groups[g].size(); ++m) {
                preds.push_back(std::move(held_out[g][m]));
                truths.push_back(v[groups[g][m]].ground_truth);
                bases.push_back(base[groups[g][m]]);
            }
        }
        result.scores.push_back({level, evaluate(preds, truths, bases, v.num_labels(), opt.threshold)});
    }
    result.chosen = choose_level(result.scores);
    return result;
}

/// CSV with columns c,topsis,chosen,mode.
inline std::string serialize_level_search(const LevelSearchResult& r) {
    const std::string mode = r.approximate ? "kfold" + std::to_string(r.folds) + "-approximate" : "loocv";
    std::string out = "c,topsis,chosen,mode\n";
    for (const auto& s : r.scores) {
        out += std::to_string(s.level) + "," + detail::metric_value(s.report.topsis) + "," +
               (s.level == r.chosen ? "1" : "0") + "," + mode + "\n";
    }
    return out;
}

}  // namespace hierlogit
