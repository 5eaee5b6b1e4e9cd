#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hierlogit/dataset.hpp"
#include "hierlogit/detail/text.hpp"
#include "hierlogit/error.hpp"
#include "hierlogit/hierarchy.hpp"
#include "hierlogit/logit_math.hpp"

namespace hierlogit {

// ---------------------------------------------------------------------------
// Confusion-based tail compression

/// Q^c: for each predicted label, the c-1 labels kept as raw logits (most
/// confused first) and the tail set folded into one generalized logit.
struct ConfusionPlan {
    struct Row {
        std::vector<std::size_t> kept;
        std::vector<std::size_t> tail;  // ascending

        friend bool operator==(const Row&, const Row&) = default;
    };

    std::size_t level = 0;
    std::vector<Row> rows;

    friend bool operator==(const ConfusionPlan&, const ConfusionPlan&) = default;
};

/// Plan row for one column of the confusion matrix.
inline ConfusionPlan::Row confusion_plan_row(std::span<const std::size_t> column, std::size_t level) {
    const std::size_t n = column.size();
    if (level < 1 || level > n) {
        throw InvalidArgument("compression level " + std::to_string(level) + " outside [1, " + std::to_string(n) + "]");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return column[a] > column[b]; });
    ConfusionPlan::Row row;
    row.kept.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(level - 1));
    row.tail.assign(order.begin() + static_cast<std::ptrdiff_t>(level - 1), order.end());
    std::sort(row.tail.begin(), row.tail.end());
    return row;
}

inline ConfusionPlan build_confusion_plan(const ConfusionMatrix& m, std::size_t level) {
    ConfusionPlan plan;
    plan.level = level;
    plan.rows.reserve(m.num_labels());
    for (std::size_t i = 0; i < m.num_labels(); ++i) {
        plan.rows.push_back(confusion_plan_row(m.column(i), level));
    }
    return plan;
}

/// [l_k for k in kept] followed by the generalized logit of the tail.
inline std::vector<double> compress_confusion(std::span<const double> logits, const ConfusionPlan& plan,
                                              std::size_t predicted) {
    if (predicted >= plan.rows.size()) {
        throw InvalidArgument("predicted label out of range for confusion plan");
    }
    if (logits.size() != plan.rows.size()) {
        throw InvalidArgument("logit vector has " + std::to_string(logits.size()) + " entries, plan expects " +
                              std::to_string(plan.rows.size()));
    }
    const auto& row = plan.rows[predicted];
    std::vector<double> out;
    out.reserve(row.kept.size() + 1);
    for (std::size_t k : row.kept) {
        out.push_back(logits[k]);
    }
    out.push_back(aggregate_logits(logits, row.tail));
    return out;
}

// ---------------------------------------------------------------------------
// PCA

struct PcaProjection {
    std::vector<double> mean;
    std::vector<std::vector<double>> components;  // descending eigenvalue order
    std::vector<double> eigenvalues;              // matching components

    std::size_t dimension() const noexcept { return components.size(); }
};

namespace detail {

/// Flips v so that its first entry with magnitude above 1e-10 is positive.
inline void canonical_sign(std::span<double> v) {
    for (double x : v) {
        if (std::abs(x) > 1e-10) {
            if (x < 0.0) {
                for (double& y : v) {
                    y = -y;
                }
            }
            return;
        }
    }
}

}  // namespace detail

/// Principal axes of mean-centred data (covariance divisor n-1).
inline PcaProjection fit_pca(std::span<const std::vector<double>> data, std::size_t level) {
    if (data.size() < 2) {
        throw InvalidArgument("PCA needs at least two vectors");
    }
    const std::size_t dim = data.front().size();
    if (level > dim) {
        throw InvalidArgument("PCA level exceeds the data dimension");
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < data.size(); ++r) {
        if (data[r].size() != dim) {
            throw InvalidArgument("PCA input vectors differ in dimension");
        }
        for (std::size_t k = 0; k < dim; ++k) {
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = data[r][k];
        }
    }
    const Eigen::VectorXd mean = x.colwise().mean();
    x.rowwise() -= mean.transpose();
    const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(data.size() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) {
        throw Error("PCA eigendecomposition failed");
    }

    PcaProjection p;
    p.mean.assign(mean.data(), mean.data() + dim);
    // Eigen returns ascending eigenvalues with an orthonormal basis, so null
    // directions are still filled in when the requested level needs them.
    for (std::size_t k = 0; k < level; ++k) {
        const auto col = static_cast<Eigen::Index>(dim - 1 - k);
        std::vector<double> v(solver.eigenvectors().col(col).data(), solver.eigenvectors().col(col).data() + dim);
        detail::canonical_sign(v);
        p.components.push_back(std::move(v));
        p.eigenvalues.push_back(solver.eigenvalues()(col));
    }
    return p;
}

inline std::vector<double> compress_pca(std::span<const double> logits, const PcaProjection& p) {
    if (logits.size() != p.mean.size()) {
        throw InvalidArgument("logit vector dimension does not match the PCA projection");
    }
    std::vector<double> out(p.components.size(), 0.0);
    for (std::size_t k = 0; k < p.components.size(); ++k) {
        double s = 0.0;
        for (std::size_t d = 0; d < logits.size(); ++d) {
            s += (logits[d] - p.mean[d]) * p.components[k][d];
        }
        out[k] = s;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tree-based compression

/// For each terminal i: {i}, then for every node on the path from i upward,
/// the terminal sets of that node's siblings (children in file order).
struct TreePlan {
    std::vector<std::vector<std::vector<std::size_t>>> groups;

    friend bool operator==(const TreePlan&, const TreePlan&) = default;
};

inline TreePlan build_tree_plan(const LabelHierarchy& h) {
    TreePlan plan;
    plan.groups.resize(h.terminal_count());
    for (std::size_t i = 0; i < h.terminal_count(); ++i) {
        auto& g = plan.groups[i];
        g.push_back({i});
        for (NodeId v : ancestral_path(h, i)) {
            const auto parent = h.parent(v);
            if (!parent) {
                break;
            }
            for (NodeId sibling : h.children(*parent)) {
                if (sibling != v) {
                    const auto td = h.terminal_descendants(sibling);
                    g.emplace_back(td.begin(), td.end());
                }
            }
        }
    }
    return plan;
}

inline std::vector<double> compress_tree(std::span<const double> logits, const TreePlan& plan, std::size_t predicted) {
    if (predicted >= plan.groups.size() || logits.size() != plan.groups.size()) {
        throw InvalidArgument("tree compression: label or dimension mismatch");
    }
    std::vector<double> out;
    out.reserve(plan.groups[predicted].size());
    for (const auto& group : plan.groups[predicted]) {
        out.push_back(aggregate_logits(logits, group));
    }
    return out;
}

inline std::vector<double> compress_single_logit(std::span<const double> logits, std::size_t label) {
    if (label >= logits.size()) {
        throw InvalidArgument("single-logit compression: label out of range");
    }
    return {logits[label]};
}

// ---------------------------------------------------------------------------
// Scheme-level compressor

enum class Scheme { Confusion, PcaGlobal, PcaLocal, Tree, SingleLogit, None };

inline std::string_view to_string(Scheme s) {
    switch (s) {
        case Scheme::Confusion: return "confusion";
        case Scheme::PcaGlobal: return "pca-global";
        case Scheme::PcaLocal: return "pca-local";
        case Scheme::Tree: return "tree";
        case Scheme::SingleLogit: return "single-logit";
        case Scheme::None: return "none";
    }
    return "?";
}

inline Scheme parse_scheme(std::string_view s) {
    for (Scheme k : {Scheme::Confusion, Scheme::PcaGlobal, Scheme::PcaLocal, Scheme::Tree, Scheme::SingleLogit,
                     Scheme::None}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    throw InvalidArgument("unknown compression scheme '" + std::string(s) + "'");
}

/// Schemes whose compression level is a free parameter.
inline bool takes_level(Scheme s) {
    return s == Scheme::Confusion || s == Scheme::PcaGlobal || s == Scheme::PcaLocal;
}

/// True when the features for conditioning label i depend only on V_i (or
/// on column i of the confusion matrix), so dropping one validation record
/// predicted as i leaves every other label's features unchanged.
inline bool is_row_local(Scheme s) { return s != Scheme::PcaGlobal; }

/// A fitted compression scheme: maps a logit vector to the feature vector
/// used by estimator (conditioning label i, target label j).
///
/// Every scheme except single-logit ignores j. The single-logit baseline
/// feeds estimator j its own logit l_j.
class Compressor {
public:
    using LocalPca = std::vector<std::optional<PcaProjection>>;  // empty when V_i is empty
    using State = std::variant<std::monostate, ConfusionPlan, PcaProjection, LocalPca, TreePlan>;

    Compressor(Scheme scheme, std::size_t num_labels, std::size_t level, State state)
        : scheme_(scheme), num_labels_(num_labels), level_(level), state_(std::move(state)) {}

    Scheme scheme() const noexcept { return scheme_; }
    std::size_t num_labels() const noexcept { return num_labels_; }
    /// 0 for schemes without a level.
    std::size_t level() const noexcept { return level_; }
    const State& state() const noexcept { return state_; }

    std::vector<double> compress(std::span<const double> logits, std::size_t conditioning, std::size_t target) const {
        if (logits.size() != num_labels_) {
            throw InvalidArgument("logit vector has " + std::to_string(logits.size()) + " entries, compressor expects " +
                                  std::to_string(num_labels_));
        }
        switch (scheme_) {
            case Scheme::Confusion:
                return compress_confusion(logits, std::get<ConfusionPlan>(state_), conditioning);
            case Scheme::PcaGlobal:
                return compress_pca(logits, std::get<PcaProjection>(state_));
            case Scheme::PcaLocal: {
                const auto& local = std::get<LocalPca>(state_).at(conditioning);
                if (!local) {
                    throw InvalidArgument("no local PCA for label " + std::to_string(conditioning));
                }
                return compress_pca(logits, *local);
            }
            case Scheme::Tree:
                return compress_tree(logits, std::get<TreePlan>(state_), conditioning);
            case Scheme::SingleLogit:
                return compress_single_logit(logits, target);
            case Scheme::None:
                return {logits.begin(), logits.end()};
        }
        return {};
    }

    /// Whether compress(L, i, j) depends on j.
    bool per_target() const noexcept { return scheme_ == Scheme::SingleLogit; }

private:
    Scheme scheme_;
    std::size_t num_labels_;
    std::size_t level_;
    State state_;
};

/// Fits `scheme` on validation data. `hierarchy` is required for Scheme::Tree.
inline Compressor fit_compressor(Scheme scheme, std::size_t level, const LogitDataset& v,
                                 const LabelHierarchy* hierarchy = nullptr) {
    const std::size_t n = v.num_labels();
    if (takes_level(scheme) && (level < 1 || level > n)) {
        throw InvalidArgument("compression level " + std::to_string(level) + " outside [1, " + std::to_string(n) + "]");
    }
    switch (scheme) {
        case Scheme::Confusion:
            return {scheme, n, level, build_confusion_plan(build_confusion(v), level)};
        case Scheme::PcaGlobal: {
            std::vector<std::vector<double>> rows;
            rows.reserve(v.size());
            for (const auto& r : v.records()) {
                rows.push_back(r.logits);
            }
            return {scheme, n, level, fit_pca(rows, level)};
        }
        case Scheme::PcaLocal: {
            Compressor::LocalPca local(n);
            const auto parts = partition_by_prediction(v);
            for (std::size_t i = 0; i < n; ++i) {
                if (parts[i].empty()) {
                    continue;
                }
                std::vector<std::vector<double>> rows;
                for (std::size_t k : parts[i]) {
                    rows.push_back(v[k].logits);
                }
                if (rows.size() == 1) {
                    // A single point has no spread: centre on it and keep the leading axes.
                    PcaProjection p;
                    p.mean = rows.front();
                    for (std::size_t c = 0; c < level; ++c) {
                        std::vector<double> e(n, 0.0);
                        e[c] = 1.0;
                        p.components.push_back(std::move(e));
                        p.eigenvalues.push_back(0.0);
                    }
                    local[i] = std::move(p);
                } else {
                    local[i] = fit_pca(rows, level);
                }
            }
            return {scheme, n, level, std::move(local)};
        }
        case Scheme::Tree:
            if (hierarchy == nullptr) {
                throw InvalidArgument("tree compression requires a hierarchy");
            }
            if (hierarchy->terminal_count() != n) {
                throw InvalidArgument("hierarchy terminal count does not match the dataset");
            }
            return {scheme, n, 0, build_tree_plan(*hierarchy)};
        case Scheme::SingleLogit:
        case Scheme::None:
            return {scheme, n, 0, std::monostate{}};
    }
    throw InvalidArgument("unhandled scheme");
}

// ---------------------------------------------------------------------------
// Text serialization

namespace detail {

inline void append_indices(std::string& out, std::span<const std::size_t> idx) {
    for (std::size_t i : idx) {
        out += ' ';
        out += std::to_string(i);
    }
}

inline void append_vector(std::string& out, std::string_view tag, std::span<const double> v) {
    out += tag;
    for (double x : v) {
        out += ' ';
        out += format_double(x);
    }
    out += '\n';
}

inline void write_pca(std::string& out, const PcaProjection& p) {
    out += "pca " + std::to_string(p.components.size()) + "\n";
    append_vector(out, "mean", p.mean);
    for (std::size_t k = 0; k < p.components.size(); ++k) {
        append_vector(out, "eigenvalue", std::span<const double>(&p.eigenvalues[k], 1));
        append_vector(out, "component", p.components[k]);
    }
}

inline std::vector<double> read_vector(LineCursor& in, std::string_view tag, std::size_t expected) {
    const auto toks = in.next(tag);
    if (toks.size() != expected + 1) {
        in.fail("'" + std::string(tag) + "' expects " + std::to_string(expected) + " values");
    }
    std::vector<double> v;
    for (std::size_t k = 1; k < toks.size(); ++k) {
        v.push_back(in.number(toks[k]));
    }
    return v;
}

inline PcaProjection read_pca(LineCursor& in, std::size_t dim) {
    const auto head = in.next("pca");
    if (head.size() != 2) {
        in.fail("malformed pca header");
    }
    const std::size_t count = in.index(head[1]);
    PcaProjection p;
    p.mean = read_vector(in, "mean", dim);
    for (std::size_t k = 0; k < count; ++k) {
        p.eigenvalues.push_back(read_vector(in, "eigenvalue", 1).front());
        p.components.push_back(read_vector(in, "component", dim));
    }
    return p;
}

}  // namespace detail

/// Appends the compressor block:
///
///     compressor <scheme> <labels> <level>
///     <scheme-specific lines>
///     end-compressor
inline void write_compressor(std::string& out, const Compressor& c) {
    out += "compressor " + std::string(to_string(c.scheme())) + " " + std::to_string(c.num_labels()) + " " +
           std::to_string(c.level()) + "\n";
    switch (c.scheme()) {
        case Scheme::Confusion: {
            const auto& plan = std::get<ConfusionPlan>(c.state());
            for (std::size_t i = 0; i < plan.rows.size(); ++i) {
                out += "row " + std::to_string(i) + " kept";
                detail::append_indices(out, plan.rows[i].kept);
                out += " tail";
                detail::append_indices(out, plan.rows[i].tail);
                out += '\n';
            }
            break;
        }
        case Scheme::PcaGlobal:
            detail::write_pca(out, std::get<PcaProjection>(c.state()));
            break;
        case Scheme::PcaLocal: {
            const auto& local = std::get<Compressor::LocalPca>(c.state());
            for (std::size_t i = 0; i < local.size(); ++i) {
                out += "local " + std::to_string(i) + (local[i] ? " fitted\n" : " empty\n");
                if (local[i]) {
                    detail::write_pca(out, *local[i]);
                }
            }
            break;
        }
        case Scheme::Tree: {
            const auto& plan = std::get<TreePlan>(c.state());
            for (std::size_t i = 0; i < plan.groups.size(); ++i) {
                out += "groups " + std::to_string(i);
                for (const auto& g : plan.groups[i]) {
                    out += " ";
                    for (std::size_t k = 0; k < g.size(); ++k) {
                        out += (k ? "," : "") + std::to_string(g[k]);
                    }
                }
                out += '\n';
            }
            break;
        }
        case Scheme::SingleLogit:
        case Scheme::None:
            break;
    }
    out += "end-compressor\n";
}

inline Compressor read_compressor(detail::LineCursor& in) {
    const auto head = in.next("compressor");
    if (head.size() != 4) {
        in.fail("malformed compressor header");
    }
    Scheme scheme{};
    try {
        scheme = parse_scheme(head[1]);
    } catch (const InvalidArgument& e) {
        in.fail(e.what());
    }
    const std::size_t n = in.index(head[2]);
    const std::size_t level = in.index(head[3]);
    if (n < 2) {
        in.fail("compressor needs at least two labels");
    }
    auto check_label = [&](std::size_t k) {
        if (k >= n) {
            in.fail("label index " + std::to_string(k) + " out of range");
        }
        return k;
    };
    Compressor::State state;
    switch (scheme) {
        case Scheme::Confusion: {
            ConfusionPlan plan;
            plan.level = level;
            for (std::size_t i = 0; i < n; ++i) {
                const auto toks = in.next("row");
                if (toks.size() < 4 || in.index(toks[1]) != i || toks[2] != "kept") {
                    in.fail("malformed confusion row");
                }
                ConfusionPlan::Row row;
                std::size_t k = 3;
                for (; k < toks.size() && toks[k] != "tail"; ++k) {
                    row.kept.push_back(check_label(in.index(toks[k])));
                }
                if (k == toks.size()) {
                    in.fail("confusion row without tail");
                }
                for (++k; k < toks.size(); ++k) {
                    row.tail.push_back(check_label(in.index(toks[k])));
                }
                if (row.kept.size() + 1 != level || row.tail.empty() || row.kept.size() + row.tail.size() != n) {
                    in.fail("confusion row does not partition the labels at level " + std::to_string(level));
                }
                plan.rows.push_back(std::move(row));
            }
            state = std::move(plan);
            break;
        }
        case Scheme::PcaGlobal:
            state = detail::read_pca(in, n);
            break;
        case Scheme::PcaLocal: {
            Compressor::LocalPca local(n);
            for (std::size_t i = 0; i < n; ++i) {
                const auto toks = in.next("local");
                if (toks.size() != 3 || in.index(toks[1]) != i) {
                    in.fail("malformed local PCA entry");
                }
                if (toks[2] == "fitted") {
                    local[i] = detail::read_pca(in, n);
                } else if (toks[2] != "empty") {
                    in.fail("local PCA entry must be 'fitted' or 'empty'");
                }
            }
            state = std::move(local);
            break;
        }
        case Scheme::Tree: {
            TreePlan plan;
            for (std::size_t i = 0; i < n; ++i) {
                const auto toks = in.next("groups");
                if (toks.size() < 3 || in.index(toks[1]) != i) {
                    in.fail("malformed tree groups");
                }
                std::vector<std::vector<std::size_t>> groups;
                for (std::size_t k = 2; k < toks.size(); ++k) {
                    std::vector<std::size_t> g;
                    for (auto part : detail::split(toks[k], ',')) {
                        g.push_back(check_label(in.index(part)));
                    }
                    groups.push_back(std::move(g));
                }
                plan.groups.push_back(std::move(groups));
            }
            state = std::move(plan);
            break;
        }
        case Scheme::SingleLogit:
        case Scheme::None:
            break;
    }
    in.next("end-compressor");
    return {scheme, n, level, std::move(state)};
}

}  // namespace hierlogit
