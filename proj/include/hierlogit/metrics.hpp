#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hierlogit/detail/text.hpp"
#include "hierlogit/error.hpp"
#include "hierlogit/inference.hpp"

namespace hierlogit {

enum class Outcome { CPersist, CCorrupt, CWithdrawn, CSoft, ICPersist, ICWithdrawn, ICReform, ICRemain };

/// Buckets one prediction. Examples whose base prediction equals the truth
/// fall on the C side, the rest on the IC side.
///
/// A terminal (or single-label set) prediction on the IC side that names the
/// truth counts as a reform: it is a correct non-root prediction.
inline Outcome classify_outcome(const HierarchicalPrediction& pred, std::size_t truth, std::size_t base_prediction,
                                std::size_t num_labels) {
    const bool correct_base = base_prediction == truth;
    const bool terminal_like =
        pred.kind == PredictionKind::Terminal || (pred.kind == PredictionKind::Set && pred.labels.size() == 1);
    const bool hit = pred.contains(truth);
    if (pred.withdrawn(num_labels)) {
        return correct_base ? Outcome::CWithdrawn : Outcome::ICWithdrawn;
    }
    if (correct_base) {
        if (terminal_like) {
            return hit ? Outcome::CPersist : Outcome::CCorrupt;
        }
        return hit ? Outcome::CSoft : Outcome::CCorrupt;
    }
    if (terminal_like) {
        return hit ? Outcome::ICReform : Outcome::ICPersist;
    }
    return hit ? Outcome::ICReform : Outcome::ICRemain;
}

/// Mean over examples of (log2|C| - log2|y|) / log2|C| for correct predictions, 0 otherwise.
inline double avg_sig(std::span<const HierarchicalPrediction> preds, std::span<const std::size_t> truths,
                      std::size_t num_labels) {
    if (num_labels < 2) {
        throw InvalidArgument("Avg-sIG needs at least two labels");
    }
    if (preds.empty() || preds.size() != truths.size()) {
        throw InvalidArgument("Avg-sIG needs matching, nonempty predictions and truths");
    }
    const double max_gain = std::log2(static_cast<double>(num_labels));
    double total = 0.0;
    for (std::size_t k = 0; k < preds.size(); ++k) {
        if (preds[k].contains(truths[k])) {
            total += (max_gain - std::log2(static_cast<double>(preds[k].labels.size()))) / max_gain;
        }
    }
    return total / static_cast<double>(preds.size());
}

/// Criteria order: c_persist, c_soft, c_withdrawn, c_corrupt, ic_persist,
/// ic_reform, ic_remain, ic_withdrawn, avg_sig.
using Criteria = std::array<double, 9>;

inline constexpr Criteria kTopsisBest{1, 0, 0, 0, 0, 1, 0, 0, 1};
inline constexpr Criteria kTopsisWorst{0, 0, 0, 1, 1, 0, 0, 0, 0};

/// Unweighted closeness to the ideal: d(a, worst) / (d(a, worst) + d(a, best)).
inline double topsis(const Criteria& a) {
    double to_best = 0.0;
    double to_worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (!(a[k] >= 0.0 && a[k] <= 1.0)) {
            throw InvalidArgument("TOPSIS criteria must lie in [0, 1]");
        }
        to_best += (a[k] - kTopsisBest[k]) * (a[k] - kTopsisBest[k]);
        to_worst += (a[k] - kTopsisWorst[k]) * (a[k] - kTopsisWorst[k]);
    }
    to_best = std::sqrt(to_best);
    to_worst = std::sqrt(to_worst);
    return to_worst / (to_worst + to_best);
}

inline constexpr std::size_t kEceBins = 10;

/// Expected calibration error over non-withdrawn predictions, with ten
/// equal-width bins on [threshold, 1]. Bins are half-open except the last.
/// Returns nullopt when every prediction was withdrawn.
inline std::optional<double> ece(std::span<const HierarchicalPrediction> preds, std::span<const std::size_t> truths,
                                 std::size_t num_labels, double threshold) {
    if (!(threshold >= 0.0 && threshold < 1.0)) {
        throw InvalidArgument("ECE threshold must lie in [0, 1)");
    }
    if (preds.size() != truths.size()) {
        throw InvalidArgument("ECE needs matching predictions and truths");
    }
    std::array<std::size_t, kEceBins> count{};
    std::array<std::size_t, kEceBins> hits{};
    std::array<double, kEceBins> confidence{};
    std::size_t retained = 0;
    const double width = (1.0 - threshold) / static_cast<double>(kEceBins);
    for (std::size_t k = 0; k < preds.size(); ++k) {
        if (preds[k].withdrawn(num_labels)) {
            continue;
        }
        const double v = preds[k].posterior;
        auto bin = v <= threshold ? 0.0 : std::floor((v - threshold) / width);
        const auto b = std::min(static_cast<std::size_t>(bin), kEceBins - 1);
        ++count[b];
        hits[b] += preds[k].contains(truths[k]) ? 1 : 0;
        confidence[b] += v;
        ++retained;
    }
    if (retained == 0) {
        return std::nullopt;
    }
    double total = 0.0;
    for (std::size_t b = 0; b < kEceBins; ++b) {
        if (count[b] == 0) {
            continue;
        }
        const double n = static_cast<double>(count[b]);
        total += (n / static_cast<double>(retained)) * std::abs(static_cast<double>(hits[b]) / n - confidence[b] / n);
    }
    return total;
}

struct MetricReport {
    std::size_t correct_count = 0;    // |S_c|
    std::size_t incorrect_count = 0;  // |S_ic|
    std::optional<double> c_persist, c_soft, c_withdrawn, c_corrupt;
    std::optional<double> ic_persist, ic_reform, ic_remain, ic_withdrawn;
    double avg_sig = 0.0;
    std::optional<double> topsis;
    std::optional<double> ece;

    /// All nine criteria in TOPSIS order, when both sides are nonempty.
    std::optional<Criteria> criteria() const {
        if (correct_count == 0 || incorrect_count == 0) {
            return std::nullopt;
        }
        return Criteria{*c_persist, *c_soft,    *c_withdrawn,  *c_corrupt, *ic_persist,
                        *ic_reform, *ic_remain, *ic_withdrawn, avg_sig};
    }
};

/// Full metric suite. `base_predictions` are argmax labels of the logits.
inline MetricReport evaluate(std::span<const HierarchicalPrediction> preds, std::span<const std::size_t> truths,
                             std::span<const std::size_t> base_predictions, std::size_t num_labels, double threshold) {
    if (preds.size() != truths.size() || preds.size() != base_predictions.size()) {
        throw InvalidArgument("evaluate needs one truth and base prediction per prediction");
    }
    std::array<std::size_t, 8> tally{};
    MetricReport r;
    for (std::size_t k = 0; k < preds.size(); ++k) {
        ++tally[static_cast<std::size_t>(classify_outcome(preds[k], truths[k], base_predictions[k], num_labels))];
        (base_predictions[k] == truths[k] ? r.correct_count : r.incorrect_count) += 1;
    }
    auto frac = [&](Outcome o, std::size_t denom) -> std::optional<double> {
        if (denom == 0) {
            return std::nullopt;
        }
        return static_cast<double>(tally[static_cast<std::size_t>(o)]) / static_cast<double>(denom);
    };
    r.c_persist = frac(Outcome::CPersist, r.correct_count);
    r.c_soft = frac(Outcome::CSoft, r.correct_count);
    r.c_withdrawn = frac(Outcome::CWithdrawn, r.correct_count);
    r.c_corrupt = frac(Outcome::CCorrupt, r.correct_count);
    r.ic_persist = frac(Outcome::ICPersist, r.incorrect_count);
    r.ic_reform = frac(Outcome::ICReform, r.incorrect_count);
    r.ic_remain = frac(Outcome::ICRemain, r.incorrect_count);
    r.ic_withdrawn = frac(Outcome::ICWithdrawn, r.incorrect_count);
    if (!preds.empty()) {
        r.avg_sig = avg_sig(preds, truths, num_labels);
    }
    if (const auto c = r.criteria()) {
        r.topsis = topsis(*c);
    }
    if (threshold < 1.0) {
        r.ece = ece(preds, truths, num_labels, threshold);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Report output; absent values are written as NA.

namespace detail {

inline std::string metric_value(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

inline std::vector<std::pair<std::string, std::string>> report_fields(const MetricReport& r) {
    return {
        {"n_correct", std::to_string(r.correct_count)},
        {"n_incorrect", std::to_string(r.incorrect_count)},
        {"c_persist", metric_value(r.c_persist)},
        {"c_soft", metric_value(r.c_soft)},
        {"c_withdrawn", metric_value(r.c_withdrawn)},
        {"c_corrupt", metric_value(r.c_corrupt)},
        {"ic_persist", metric_value(r.ic_persist)},
        {"ic_reform", metric_value(r.ic_reform)},
        {"ic_remain", metric_value(r.ic_remain)},
        {"ic_withdrawn", metric_value(r.ic_withdrawn)},
        {"avg_sig", format_double(r.avg_sig)},
        {"topsis", metric_value(r.topsis)},
        {"ece", metric_value(r.ece)},
    };
}

}  // namespace detail

inline std::string report_key_values(const MetricReport& r) {
    std::string out;
    for (const auto& [k, v] : detail::report_fields(r)) {
        out += k + "=" + v + "\n";
    }
    return out;
}

inline std::string report_csv_header() {
    std::vector<std::string> keys;
    for (const auto& kv : detail::report_fields(MetricReport{})) {
        keys.push_back(kv.first);
    }
    return detail::join(keys, ",");
}

inline std::string report_csv_row(const MetricReport& r) {
    std::vector<std::string> values;
    for (const auto& kv : detail::report_fields(r)) {
        values.push_back(kv.second);
    }
    return detail::join(values, ",");
}

}  // namespace hierlogit
