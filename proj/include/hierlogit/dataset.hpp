#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hierlogit/detail/text.hpp"
#include "hierlogit/error.hpp"
#include "hierlogit/logit_math.hpp"

namespace hierlogit {

struct LogitRecord {
    std::size_t ground_truth = 0;
    std::vector<double> logits;
};

/// Base prediction of a record: argmax of its logits, lowest index on ties.
inline std::size_t argmax_label(const LogitRecord& r) { return argmax(r.logits); }

class LogitDataset {
public:
    LogitDataset() = default;

    explicit LogitDataset(std::vector<std::string> label_names) : label_names_(std::move(label_names)) {
        if (label_names_.size() < 2) {
            throw InvalidArgument("a dataset needs at least two labels");
        }
    }

    LogitDataset(std::vector<std::string> label_names, std::vector<LogitRecord> records)
        : LogitDataset(std::move(label_names)) {
        records_.reserve(records.size());
        for (auto& r : records) {
            add(std::move(r));
        }
    }

    void add(LogitRecord r) {
        if (r.logits.size() != label_names_.size()) {
            throw InvalidArgument("record has " + std::to_string(r.logits.size()) + " logits, expected " +
                                  std::to_string(label_names_.size()));
        }
        if (r.ground_truth >= label_names_.size()) {
            throw InvalidArgument("ground truth index out of range");
        }
        for (double v : r.logits) {
            if (!std::isfinite(v)) {
                throw InvalidArgument("non-finite logit");
            }
        }
        records_.push_back(std::move(r));
    }

    std::size_t num_labels() const noexcept { return label_names_.size(); }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    const std::vector<std::string>& label_names() const noexcept { return label_names_; }
    const std::vector<LogitRecord>& records() const noexcept { return records_; }
    const LogitRecord& operator[](std::size_t i) const { return records_[i]; }

    /// Records at the given positions, in the given order.
    LogitDataset subset(std::span<const std::size_t> indices) const {
        LogitDataset out(label_names_);
        out.records_.reserve(indices.size());
        for (std::size_t i : indices) {
            out.records_.push_back(records_.at(i));
        }
        return out;
    }

    /// Record positions grouped by ground-truth label, in dataset order.
    std::vector<std::vector<std::size_t>> indices_by_class() const {
        std::vector<std::vector<std::size_t>> out(num_labels());
        for (std::size_t i = 0; i < records_.size(); ++i) {
            out[records_[i].ground_truth].push_back(i);
        }
        return out;
    }

private:
    std::vector<std::string> label_names_;
    std::vector<LogitRecord> records_;
};

/// Reads `label,<name_0>,...` followed by `<truth_name>,<logit_0>,...` rows.
inline LogitDataset load_dataset(std::string_view text) {
    using K = ParseError::Kind;
    const auto rows = detail::lines(text);
    std::size_t line_no = 0;
    std::size_t first = 0;
    while (first < rows.size() && detail::trim(rows[first]).empty()) {
        ++first;
    }
    if (first == rows.size()) {
        throw ParseError(K::MissingHeader, "logit CSV has no header");
    }
    const auto header = detail::split(rows[first], ',');
    if (detail::trim(header[0]) != "label") {
        throw ParseError(K::MissingHeader, "logit CSV header must start with 'label'");
    }
    std::vector<std::string> names;
    std::unordered_map<std::string, std::size_t> lookup;
    for (std::size_t i = 1; i < header.size(); ++i) {
        std::string name(detail::trim(header[i]));
        if (name.empty() || !lookup.emplace(name, names.size()).second) {
            throw ParseError(K::Syntax, "empty or duplicate label name '" + name + "' in header");
        }
        names.push_back(std::move(name));
    }
    if (names.size() < 2) {
        throw ParseError(K::Syntax, "logit CSV needs at least two labels");
    }
    LogitDataset out(names);
    line_no = first + 1;
    for (std::size_t r = first + 1; r < rows.size(); ++r) {
        ++line_no;
        if (detail::trim(rows[r]).empty()) {
            continue;
        }
        const auto fields = detail::split(rows[r], ',');
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (fields.size() != names.size() + 1) {
            throw ParseError(K::RaggedRow, where + "expected " + std::to_string(names.size() + 1) + " fields, got " +
                                               std::to_string(fields.size()));
        }
        const auto truth = lookup.find(std::string(detail::trim(fields[0])));
        if (truth == lookup.end()) {
            throw ParseError(K::UnknownLabel, where + "unknown ground-truth label '" + std::string(fields[0]) + "'");
        }
        LogitRecord rec;
        rec.ground_truth = truth->second;
        rec.logits.reserve(names.size());
        for (std::size_t i = 1; i < fields.size(); ++i) {
            const auto v = detail::parse_double(fields[i]);
            if (!v || !std::isfinite(*v)) {
                throw ParseError(K::NonNumeric, where + "bad logit '" + std::string(fields[i]) + "'");
            }
            rec.logits.push_back(*v);
        }
        out.add(std::move(rec));
    }
    return out;
}

inline std::string serialize_dataset(const LogitDataset& d) {
    std::string out = "label";
    for (const auto& n : d.label_names()) {
        out += "," + n;
    }
    out += "\n";
    for (const auto& r : d.records()) {
        out += d.label_names()[r.ground_truth];
        for (double v : r.logits) {
            out += "," + detail::format_double(v);
        }
        out += "\n";
    }
    return out;
}

/// V_i: positions of the records whose base prediction is i.
inline std::vector<std::vector<std::size_t>> partition_by_prediction(const LogitDataset& v) {
    std::vector<std::vector<std::size_t>> parts(v.num_labels());
    for (std::size_t k = 0; k < v.size(); ++k) {
        parts[argmax_label(v[k])].push_back(k);
    }
    return parts;
}

/// Raw counts; rows are ground truth, columns are predicted labels.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t num_labels) : n_(num_labels), counts_(num_labels * num_labels, 0) {}

    ConfusionMatrix(std::size_t num_labels, std::span<const std::size_t> row_major) : ConfusionMatrix(num_labels) {
        if (row_major.size() != counts_.size()) {
            throw InvalidArgument("confusion counts have the wrong size");
        }
        counts_.assign(row_major.begin(), row_major.end());
    }

    std::size_t num_labels() const noexcept { return n_; }
    std::size_t count(std::size_t truth, std::size_t predicted) const { return counts_.at(truth * n_ + predicted); }
    void increment(std::size_t truth, std::size_t predicted) { ++counts_.at(truth * n_ + predicted); }
    void decrement(std::size_t truth, std::size_t predicted) {
        auto& c = counts_.at(truth * n_ + predicted);
        if (c == 0) {
            throw InvalidArgument("confusion count underflow");
        }
        --c;
    }

    /// Column M_i indexed by ground truth.
    std::vector<std::size_t> column(std::size_t predicted) const {
        std::vector<std::size_t> col(n_);
        for (std::size_t t = 0; t < n_; ++t) {
            col[t] = count(t, predicted);
        }
        return col;
    }

    std::size_t total() const noexcept {
        std::size_t s = 0;
        for (auto c : counts_) {
            s += c;
        }
        return s;
    }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t n_;
    std::vector<std::size_t> counts_;
};

inline ConfusionMatrix build_confusion(const LogitDataset& v) {
    ConfusionMatrix m(v.num_labels());
    for (const auto& r : v.records()) {
        m.increment(r.ground_truth, argmax_label(r));
    }
    return m;
}

}  // namespace hierlogit
