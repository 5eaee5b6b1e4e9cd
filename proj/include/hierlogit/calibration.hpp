#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hierlogit/compression.hpp"
#include "hierlogit/dataset.hpp"
#include "hierlogit/detail/parallel.hpp"
#include "hierlogit/detail/text.hpp"
#include "hierlogit/error.hpp"
#include "hierlogit/lbfgs.hpp"
#include "hierlogit/logit_math.hpp"

namespace hierlogit {

/// Logistic estimate of P(y = target | base prediction = conditioning, z),
/// parameterized as sigmoid(W.z - B).
struct PosteriorEstimator {
    std::vector<double> weights;
    double bias = 0.0;
    std::size_t conditioning = 0;
    std::size_t target = 0;

    /// W.z - B
    double activation(std::span<const double> z) const {
        if (z.size() != weights.size()) {
            throw InvalidArgument("estimator expects " + std::to_string(weights.size()) + " features, got " +
                                  std::to_string(z.size()));
        }
        double s = -bias;
        for (std::size_t k = 0; k < z.size(); ++k) {
            s += weights[k] * z[k];
        }
        return s;
    }

    friend bool operator==(const PosteriorEstimator&, const PosteriorEstimator&) = default;
};

inline double evaluate_estimator(const PosteriorEstimator& e, std::span<const double> z) {
    return sigmoid(e.activation(z));
}

struct FitOptions {
    double l2 = 1e-4;  // on W only
    LbfgsOptions lbfgs{};
};

/// Mean binary cross-entropy of sigmoid(W.z - B) plus (l2/2)|W|^2.
inline double logistic_loss(const std::vector<std::vector<double>>& features, std::span<const std::uint8_t> targets,
                            std::span<const double> weights, double bias, double l2) {
    double loss = 0.0;
    for (std::size_t k = 0; k < features.size(); ++k) {
        double a = -bias;
        for (std::size_t d = 0; d < weights.size(); ++d) {
            a += weights[d] * features[k][d];
        }
        loss += -(targets[k] ? log_sigmoid(a) : log_sigmoid(-a));
    }
    loss /= static_cast<double>(features.size());
    double w2 = 0.0;
    for (double w : weights) {
        w2 += w * w;
    }
    return loss + 0.5 * l2 * w2;
}

struct LogisticFit {
    std::vector<double> weights;
    double bias = 0.0;  // B in sigmoid(W.z - B)
    LbfgsStatus status = LbfgsStatus::Converged;
    std::size_t iterations = 0;
    bool single_class = false;
};

/// Regularized logistic regression from W = 0, B = 0.
///
/// When every target is equal the fit is the constant predictor at the
/// Laplace-smoothed rate (k+1)/(n+2).
inline LogisticFit fit_logistic(const std::vector<std::vector<double>>& features, std::span<const std::uint8_t> targets,
                                const FitOptions& opt = {}) {
    const std::size_t n = features.size();
    if (n == 0 || targets.size() != n) {
        throw InvalidArgument("fit_logistic needs matching, nonempty features and targets");
    }
    const std::size_t dim = features.front().size();
    std::size_t positives = 0;
    for (auto t : targets) {
        positives += t ? 1 : 0;
    }
    LogisticFit fit;
    if (positives == 0 || positives == n) {
        const double rate = (static_cast<double>(positives) + 1.0) / (static_cast<double>(n) + 2.0);
        fit.weights.assign(dim, 0.0);
        fit.bias = -std::log(rate / (1.0 - rate));
        fit.single_class = true;
        return fit;
    }

    // Optimize theta = (W, b) with activation W.z + b; B = -b afterwards.
    const double inv_n = 1.0 / static_cast<double>(n);
    auto objective = [&](std::span<const double> theta, std::span<double> grad) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const auto& z = features[k];
            double a = theta[dim];
            for (std::size_t d = 0; d < dim; ++d) {
                a += theta[d] * z[d];
            }
            loss += targets[k] ? -log_sigmoid(a) : -log_sigmoid(-a);
            const double residual = sigmoid(a) - (targets[k] ? 1.0 : 0.0);
            for (std::size_t d = 0; d < dim; ++d) {
                grad[d] += residual * z[d];
            }
            grad[dim] += residual;
        }
        loss *= inv_n;
        for (std::size_t d = 0; d <= dim; ++d) {
            grad[d] *= inv_n;
        }
        for (std::size_t d = 0; d < dim; ++d) {
            loss += 0.5 * opt.l2 * theta[d] * theta[d];
            grad[d] += opt.l2 * theta[d];
        }
        return loss;
    };
    const auto res = minimize_lbfgs(objective, std::vector<double>(dim + 1, 0.0), opt.lbfgs);
    fit.weights.assign(res.x.begin(), res.x.begin() + static_cast<std::ptrdiff_t>(dim));
    fit.bias = -res.x[dim];
    fit.status = res.status;
    fit.iterations = res.iterations;
    return fit;
}

/// Terminal label posteriors for one logit vector, L1-normalized.
struct TerminalPosteriors {
    std::vector<double> p;
    std::size_t base_prediction = 0;
    bool fallback = false;  // softmax of the raw logits was used
};

/// The |C| x |C| grid of estimators plus the compressor their features come from.
class PosteriorModel {
public:
    PosteriorModel(Compressor compressor, std::vector<std::string> label_names)
        : compressor_(std::move(compressor)),
          label_names_(std::move(label_names)),
          estimators_(label_names_.size() * label_names_.size()),
          fallback_(label_names_.size(), true),
          subset_sizes_(label_names_.size(), 0) {
        if (label_names_.size() != compressor_.num_labels()) {
            throw InvalidArgument("label names do not match the compressor");
        }
    }

    std::size_t num_labels() const noexcept { return label_names_.size(); }
    const std::vector<std::string>& label_names() const noexcept { return label_names_; }
    const Compressor& compressor() const noexcept { return compressor_; }

    bool is_fallback(std::size_t conditioning) const { return fallback_.at(conditioning); }
    std::size_t subset_size(std::size_t conditioning) const { return subset_sizes_.at(conditioning); }
    std::size_t fallback_count() const {
        std::size_t c = 0;
        for (bool f : fallback_) {
            c += f ? 1 : 0;
        }
        return c;
    }

    const PosteriorEstimator& estimator(std::size_t conditioning, std::size_t target) const {
        return estimators_.at(conditioning * num_labels() + target);
    }

    /// Installs the estimators conditioned on `conditioning` (one per target).
    void set_row(std::size_t conditioning, std::vector<PosteriorEstimator> row, std::size_t subset_size) {
        if (row.size() != num_labels()) {
            throw InvalidArgument("estimator row has the wrong length");
        }
        for (std::size_t j = 0; j < row.size(); ++j) {
            estimators_.at(conditioning * num_labels() + j) = std::move(row[j]);
        }
        fallback_.at(conditioning) = false;
        subset_sizes_.at(conditioning) = subset_size;
    }

    void set_fallback(std::size_t conditioning) {
        for (std::size_t j = 0; j < num_labels(); ++j) {
            estimators_.at(conditioning * num_labels() + j) = PosteriorEstimator{{}, 0.0, conditioning, j};
        }
        fallback_.at(conditioning) = true;
        subset_sizes_.at(conditioning) = 0;
    }

    void set_compressor(Compressor c) {
        if (c.num_labels() != num_labels()) {
            throw InvalidArgument("compressor label count mismatch");
        }
        compressor_ = std::move(c);
    }

private:
    Compressor compressor_;
    std::vector<std::string> label_names_;
    std::vector<PosteriorEstimator> estimators_;
    std::vector<bool> fallback_;
    std::vector<std::size_t> subset_sizes_;
};

/// Fits the |C| estimators conditioned on `conditioning` from the records at `subset`.
inline std::vector<PosteriorEstimator> fit_estimator_row(const LogitDataset& v, std::span<const std::size_t> subset,
                                                         const Compressor& compressor, std::size_t conditioning,
                                                         const FitOptions& opt = {}) {
    const std::size_t n = v.num_labels();
    std::vector<std::vector<double>> features;
    if (!compressor.per_target()) {
        features.reserve(subset.size());
        for (std::size_t k : subset) {
            features.push_back(compressor.compress(v[k].logits, conditioning, 0));
        }
    }
    std::vector<std::uint8_t> targets(subset.size());
    std::vector<PosteriorEstimator> row;
    row.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
        if (compressor.per_target()) {
            features.clear();
            for (std::size_t k : subset) {
                features.push_back(compressor.compress(v[k].logits, conditioning, j));
            }
        }
        for (std::size_t k = 0; k < subset.size(); ++k) {
            targets[k] = v[subset[k]].ground_truth == j ? 1 : 0;
        }
        auto fit = fit_logistic(features, targets, opt);
        bool finite = std::isfinite(fit.bias);
        for (double w : fit.weights) {
            finite = finite && std::isfinite(w);
        }
        if (fit.status == LbfgsStatus::NonFinite || !finite) {
            throw FitError(conditioning, j,
                           "estimator (" + std::to_string(conditioning) + ", " + std::to_string(j) +
                               "): optimizer produced a non-finite loss");
        }
        row.push_back(PosteriorEstimator{std::move(fit.weights), fit.bias, conditioning, j});
    }
    return row;
}

/// Fits every estimator row on its argmax-selected subset V_i. Rows with an
/// empty V_i fall back to the softmax of the raw logits.
inline PosteriorModel fit_estimators(const LogitDataset& v, Compressor compressor, const FitOptions& opt = {}) {
    if (compressor.num_labels() != v.num_labels()) {
        throw InvalidArgument("compressor label count does not match the dataset");
    }
    PosteriorModel model(std::move(compressor), v.label_names());
    const auto parts = partition_by_prediction(v);
    std::vector<std::vector<PosteriorEstimator>> rows(v.num_labels());
    detail::parallel_for(v.num_labels(), [&](std::size_t i) {
        if (!parts[i].empty()) {
            rows[i] = fit_estimator_row(v, parts[i], model.compressor(), i, opt);
        }
    });
    for (std::size_t i = 0; i < v.num_labels(); ++i) {
        if (parts[i].empty()) {
            model.set_fallback(i);
        } else {
            model.set_row(i, std::move(rows[i]), parts[i].size());
        }
    }
    return model;
}

/// Evaluates the estimators conditioned on the base prediction and
/// L1-normalizes them (done in log space so tiny activations cannot underflow
/// the normalizer).
inline TerminalPosteriors terminal_posteriors(const PosteriorModel& model, std::span<const double> logits) {
    if (logits.size() != model.num_labels()) {
        throw InvalidArgument("logit vector has " + std::to_string(logits.size()) + " entries, model expects " +
                              std::to_string(model.num_labels()));
    }
    TerminalPosteriors out;
    out.base_prediction = argmax(logits);
    if (model.is_fallback(out.base_prediction)) {
        out.p = softmax(logits);
        out.fallback = true;
        return out;
    }
    const auto& comp = model.compressor();
    std::vector<double> log_p(model.num_labels());
    std::vector<double> z;
    if (!comp.per_target()) {
        z = comp.compress(logits, out.base_prediction, 0);
    }
    for (std::size_t j = 0; j < model.num_labels(); ++j) {
        if (comp.per_target()) {
            z = comp.compress(logits, out.base_prediction, j);
        }
        log_p[j] = log_sigmoid(model.estimator(out.base_prediction, j).activation(z));
    }
    out.p = softmax(log_p);
    return out;
}

// ---------------------------------------------------------------------------
// Model file
//
//     hierlogit-model 1
//     labels <n>
//     label <i> <name>            (n lines)
//     compressor ... end-compressor
//     row <i> fitted <|V_i|>      followed by n lines: est <j> <B> <W_0> ... <W_{d-1}>
//     row <i> fallback
//     end-model

inline constexpr int kModelFormatVersion = 1;

inline std::string serialize_model(const PosteriorModel& m) {
    std::string out = "hierlogit-model " + std::to_string(kModelFormatVersion) + "\n";
    out += "labels " + std::to_string(m.num_labels()) + "\n";
    for (std::size_t i = 0; i < m.num_labels(); ++i) {
        out += "label " + std::to_string(i) + " " + m.label_names()[i] + "\n";
    }
    write_compressor(out, m.compressor());
    for (std::size_t i = 0; i < m.num_labels(); ++i) {
        if (m.is_fallback(i)) {
            out += "row " + std::to_string(i) + " fallback\n";
            continue;
        }
        out += "row " + std::to_string(i) + " fitted " + std::to_string(m.subset_size(i)) + "\n";
        for (std::size_t j = 0; j < m.num_labels(); ++j) {
            const auto& e = m.estimator(i, j);
            out += "est " + std::to_string(j) + " " + detail::format_double(e.bias);
            for (double w : e.weights) {
                out += " " + detail::format_double(w);
            }
            out += "\n";
        }
    }
    out += "end-model\n";
    return out;
}

inline PosteriorModel parse_model(std::string_view text) {
    detail::LineCursor in(text);
    const auto head = in.next("hierlogit-model");
    if (head.size() != 2 || in.index(head[1]) != static_cast<std::size_t>(kModelFormatVersion)) {
        throw ParseError(ParseError::Kind::Version, "unsupported model file version");
    }
    const auto count = in.next("labels");
    if (count.size() != 2) {
        in.fail("malformed labels line");
    }
    const std::size_t n = in.index(count[1]);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) {
        const auto line = detail::trim(in.raw());
        const auto toks = detail::tokens(line);
        if (toks.size() < 3 || toks[0] != "label" || in.index(toks[1]) != i) {
            in.fail("malformed label line");
        }
        const auto name_start = static_cast<std::size_t>(toks[2].data() - line.data());
        names.emplace_back(line.substr(name_start));
    }
    PosteriorModel model(read_compressor(in), std::move(names));
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = in.next("row");
        if (row.size() < 3 || in.index(row[1]) != i) {
            in.fail("malformed row header");
        }
        if (row[2] == "fallback") {
            model.set_fallback(i);
            continue;
        }
        if (row[2] != "fitted" || row.size() != 4) {
            in.fail("row must be 'fitted <size>' or 'fallback'");
        }
        const std::size_t size = in.index(row[3]);
        std::vector<PosteriorEstimator> estimators;
        for (std::size_t j = 0; j < n; ++j) {
            const auto toks = in.next("est");
            if (toks.size() < 3 || in.index(toks[1]) != j) {
                in.fail("malformed estimator line");
            }
            PosteriorEstimator e;
            e.conditioning = i;
            e.target = j;
            e.bias = in.number(toks[2]);
            for (std::size_t k = 3; k < toks.size(); ++k) {
                e.weights.push_back(in.number(toks[k]));
            }
            std::size_t expected = 0;
            try {
                expected = model.compressor().compress(std::vector<double>(n, 0.0), i, j).size();
            } catch (const InvalidArgument& err) {
                in.fail(err.what());
            }
            if (e.weights.size() != expected) {
                in.fail("estimator (" + std::to_string(i) + ", " + std::to_string(j) + ") has " +
                        std::to_string(e.weights.size()) + " weights, compressor produces " + std::to_string(expected));
            }
            estimators.push_back(std::move(e));
        }
        model.set_row(i, std::move(estimators), size);
    }
    in.next("end-model");
    return model;
}

}  // namespace hierlogit
