#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "hierlogit/error.hpp"

namespace hierlogit {

/// Index of the largest entry; ties resolve to the lowest index.
inline std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) {
            best = i;
        }
    }
    return best;
}

/// ln(sum_i exp(x_i)) evaluated with max-subtraction.
inline double log_sum_exp(std::span<const double> values) {
    if (values.empty()) {
        throw InvalidArgument("log_sum_exp of an empty range");
    }
    const double peak = *std::max_element(values.begin(), values.end());
    if (std::isinf(peak)) {
        return peak;
    }
    double total = 0.0;
    for (double v : values) {
        total += std::exp(v - peak);
    }
    return peak + std::log(total);
}

/// Generalized logit of a label group: ln(sum_{i in group} exp(l_i)).
///
/// Replacing the group's logits by this single value leaves the softmax mass
/// of the group unchanged and every other label's softmax untouched.
inline double aggregate_logits(std::span<const double> logits, std::span<const std::size_t> group) {
    if (group.empty()) {
        throw InvalidArgument("aggregate_logits: empty label group");
    }
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i : group) {
        if (i >= logits.size()) {
            throw InvalidArgument("aggregate_logits: label index out of range");
        }
        peak = std::max(peak, logits[i]);
    }
    if (std::isinf(peak)) {
        return peak;
    }
    double total = 0.0;
    for (std::size_t i : group) {
        total += std::exp(logits[i] - peak);
    }
    return peak + std::log(total);
}

inline std::vector<double> softmax(std::span<const double> logits) {
    const double norm = log_sum_exp(logits);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - norm);
    }
    return out;
}

inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// log(sigmoid(x)) without underflow for large negative x.
inline double log_sigmoid(double x) {
    if (x >= 0.0) {
        return -std::log1p(std::exp(-x));
    }
    return x - std::log1p(std::exp(x));
}

}  // namespace hierlogit
