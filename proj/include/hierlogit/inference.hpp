#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hierlogit/calibration.hpp"
#include "hierlogit/detail/text.hpp"
#include "hierlogit/error.hpp"
#include "hierlogit/hierarchy.hpp"

namespace hierlogit {

enum class PredictionKind { Terminal, Superclass, Root, Set };

inline std::string_view to_string(PredictionKind k) {
    switch (k) {
        case PredictionKind::Terminal: return "terminal";
        case PredictionKind::Superclass: return "superclass";
        case PredictionKind::Root: return "root";
        case PredictionKind::Set: return "set";
    }
    return "?";
}

inline PredictionKind parse_prediction_kind(std::string_view s) {
    for (auto k : {PredictionKind::Terminal, PredictionKind::Superclass, PredictionKind::Root, PredictionKind::Set}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    throw ParseError(ParseError::Kind::Syntax, "unknown prediction kind '" + std::string(s) + "'");
}

/// A (possibly generalized) prediction and its posterior.
///
/// Tree predictions name a node; set predictions carry only a label set. In
/// both cases `labels` holds the covered terminal indices in ascending order.
struct HierarchicalPrediction {
    PredictionKind kind = PredictionKind::Terminal;
    std::optional<NodeId> node;
    std::vector<std::size_t> labels;
    double posterior = 0.0;
    std::size_t base_prediction = 0;

    bool contains(std::size_t label) const { return std::binary_search(labels.begin(), labels.end(), label); }

    /// Root, or a set covering every label.
    bool withdrawn(std::size_t num_labels) const {
        return kind == PredictionKind::Root || (kind == PredictionKind::Set && labels.size() == num_labels);
    }
};

namespace detail {

inline void check_threshold(double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw InvalidArgument("confidence threshold must lie in [0, 1]");
    }
}

}  // namespace detail

/// Summed terminal posterior of every node on the ancestral path of the base
/// prediction, leaf first. The root entry is exactly 1.
inline std::vector<double> path_posteriors(const TerminalPosteriors& post, const LabelHierarchy& h) {
    if (post.p.size() != h.terminal_count()) {
        throw InvalidArgument("posterior vector does not match the hierarchy");
    }
    std::vector<double> out;
    for (NodeId k : ancestral_path(h, post.base_prediction)) {
        double mass = 1.0;
        if (k != h.root()) {
            mass = 0.0;
            for (std::size_t t : h.terminal_descendants(k)) {
                mass += post.p[t];
            }
        }
        out.push_back(mass);
    }
    return out;
}

/// Bottom-up walk from the base prediction: the first node on the ancestral
/// path whose summed terminal posterior reaches the threshold. The root is
/// pinned to posterior 1, so the walk always ends.
inline HierarchicalPrediction infer_tree(const TerminalPosteriors& post, const LabelHierarchy& h, double threshold) {
    detail::check_threshold(threshold);
    const auto masses = path_posteriors(post, h);
    const auto path = ancestral_path(h, post.base_prediction);
    HierarchicalPrediction pred;
    pred.base_prediction = post.base_prediction;
    for (std::size_t step = 0; step < path.size(); ++step) {
        if (masses[step] >= threshold) {
            const NodeId k = path[step];
            const auto td = h.terminal_descendants(k);
            pred.node = k;
            pred.labels.assign(td.begin(), td.end());
            pred.posterior = masses[step];
            pred.kind = k == h.root()       ? PredictionKind::Root
                        : h.is_terminal(k) ? PredictionKind::Terminal
                                           : PredictionKind::Superclass;
            return pred;
        }
    }
    throw Error("unreachable: root posterior is pinned to 1");
}

inline HierarchicalPrediction infer_tree(const PosteriorModel& model, const LabelHierarchy& h,
                                         std::span<const double> logits, double threshold) {
    return infer_tree(terminal_posteriors(model, logits), h, threshold);
}

/// Tree-free generalization: add labels in descending posterior order (ties
/// to the lower index) until the running sum reaches the threshold. At least
/// one label is always emitted; zero-posterior labels are never added. A set
/// covering every label has posterior exactly 1.
inline HierarchicalPrediction infer_set(const TerminalPosteriors& post, double threshold) {
    detail::check_threshold(threshold);
    const std::size_t n = post.p.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return post.p[a] > post.p[b]; });
    HierarchicalPrediction pred;
    pred.kind = PredictionKind::Set;
    pred.base_prediction = post.base_prediction;
    double total = 0.0;
    for (std::size_t idx : order) {
        if (!pred.labels.empty() && (total >= threshold || post.p[idx] <= 0.0)) {
            break;
        }
        pred.labels.push_back(idx);
        total += post.p[idx];
    }
    std::sort(pred.labels.begin(), pred.labels.end());
    pred.posterior = pred.labels.size() == n ? 1.0 : total;
    return pred;
}

inline HierarchicalPrediction infer_set(const PosteriorModel& model, std::span<const double> logits, double threshold) {
    return infer_set(terminal_posteriors(model, logits), threshold);
}

// ---------------------------------------------------------------------------
// Prediction CSV: example_index,kind,label_or_set,posterior

inline std::string prediction_label(const HierarchicalPrediction& p, std::span<const std::string> terminal_names,
                                    const LabelHierarchy* h) {
    if (p.kind != PredictionKind::Set) {
        if (h == nullptr || !p.node) {
            throw InvalidArgument("tree predictions need their hierarchy to be written");
        }
        return h->name(*p.node);
    }
    std::vector<std::string> names;
    for (std::size_t t : p.labels) {
        names.push_back(terminal_names[t]);
    }
    return detail::join(names, "|");
}

inline std::string serialize_predictions(std::span<const HierarchicalPrediction> preds,
                                         std::span<const std::string> terminal_names, const LabelHierarchy* h) {
    std::string out = "example_index,kind,label_or_set,posterior\n";
    for (std::size_t i = 0; i < preds.size(); ++i) {
        out += std::to_string(i) + "," + std::string(to_string(preds[i].kind)) + "," +
               detail::csv_field(prediction_label(preds[i], terminal_names, h)) + "," +
               detail::format_double(preds[i].posterior) + "\n";
    }
    return out;
}

/// Reads predictions back. Tree rows are resolved against `h`; set rows
/// against the terminal names. base_prediction is left at 0: it comes from
/// the logits, not the prediction file.
inline std::vector<HierarchicalPrediction> parse_predictions(std::string_view text,
                                                             std::span<const std::string> terminal_names,
                                                             const LabelHierarchy* h) {
    using K = ParseError::Kind;
    const auto rows = detail::lines(text);
    if (rows.empty() || detail::trim(rows.front()) != "example_index,kind,label_or_set,posterior") {
        throw ParseError(K::MissingHeader, "prediction CSV header missing");
    }
    std::vector<HierarchicalPrediction> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (detail::trim(rows[r]).empty()) {
            continue;
        }
        const auto f = detail::csv_split(rows[r]);
        const std::string where = "prediction row " + std::to_string(r) + ": ";
        if (f.size() != 4) {
            throw ParseError(K::RaggedRow, where + "expected 4 fields");
        }
        if (detail::parse_int<std::size_t>(f[0]) != out.size()) {
            throw ParseError(K::Syntax, where + "example_index out of sequence");
        }
        HierarchicalPrediction p;
        p.kind = parse_prediction_kind(f[1]);
        const auto posterior = detail::parse_double(f[3]);
        if (!posterior) {
            throw ParseError(K::NonNumeric, where + "bad posterior");
        }
        p.posterior = *posterior;
        if (p.kind == PredictionKind::Set) {
            for (auto name : detail::split(f[2], '|')) {
                const auto it = std::find(terminal_names.begin(), terminal_names.end(), name);
                if (it == terminal_names.end()) {
                    throw ParseError(K::UnknownLabel, where + "unknown label '" + std::string(name) + "'");
                }
                p.labels.push_back(static_cast<std::size_t>(it - terminal_names.begin()));
            }
            std::sort(p.labels.begin(), p.labels.end());
        } else {
            if (h == nullptr) {
                throw InvalidArgument("tree predictions need a hierarchy to be read");
            }
            const auto node = h->find(f[2]);
            if (!node) {
                throw ParseError(K::UnknownLabel, where + "unknown node '" + f[2] + "'");
            }
            p.node = *node;
            const auto td = h->terminal_descendants(*node);
            p.labels.assign(td.begin(), td.end());
        }
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace hierlogit
