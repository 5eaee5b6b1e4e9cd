#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hierlogit/compression.hpp"
#include "hierlogit/detail/text.hpp"
#include "hierlogit/error.hpp"
#include "hierlogit/experiment.hpp"

namespace hierlogit {

/// `key=value` lines; '#' starts a comment line. Keys keep file order.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::size_t line_no = 0;
    for (auto raw : detail::lines(text)) {
        ++line_no;
        const auto line = detail::trim(raw);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos || detail::trim(line.substr(0, eq)).empty()) {
            throw ParseError(ParseError::Kind::Syntax, "config line " + std::to_string(line_no) + ": expected key=value");
        }
        out.emplace_back(std::string(detail::trim(line.substr(0, eq))), std::string(detail::trim(line.substr(eq + 1))));
    }
    return out;
}

/// Compression level: a positive integer, or "auto" for cross-validated selection.
struct LevelSetting {
    std::optional<std::size_t> fixed;  // nullopt means auto

    static LevelSetting parse(std::string_view s) {
        if (s == "auto") {
            return {};
        }
        const auto v = detail::parse_int<std::size_t>(s);
        if (!v || *v == 0) {
            throw InvalidArgument("level must be a positive integer or 'auto', got '" + std::string(s) + "'");
        }
        return {v};
    }
};

struct RunConfig {
    std::optional<std::string> hierarchy;
    std::optional<std::string> validation;
    std::optional<std::string> test;
    std::optional<std::string> model;
    std::optional<std::string> out;
    Scheme scheme = Scheme::Confusion;
    std::optional<LevelSetting> level;
    double threshold = 0.9;
    std::uint64_t seed = 0;
    InferenceMode mode = InferenceMode::Tree;

    /// Checks the cross-field rules; throws InvalidArgument on violation.
    void validate() const {
        if (!(threshold >= 0.0 && threshold <= 1.0)) {
            throw InvalidArgument("threshold must lie in [0, 1]");
        }
        if (scheme == Scheme::Tree && !hierarchy) {
            throw InvalidArgument("scheme 'tree' requires --hierarchy");
        }
        if (!takes_level(scheme) && level) {
            throw InvalidArgument("scheme '" + std::string(to_string(scheme)) + "' does not take a level");
        }
        if (takes_level(scheme) && !level) {
            throw InvalidArgument("scheme '" + std::string(to_string(scheme)) + "' requires --level");
        }
        if (mode == InferenceMode::Tree && level && !level->fixed && !hierarchy) {
            throw InvalidArgument("--level auto with tree inference requires --hierarchy");
        }
    }
};

}  // namespace hierlogit
