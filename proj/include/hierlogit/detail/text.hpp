#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace hierlogit::detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

/// Splits text into lines, dropping a trailing '\r' from each.
inline std::vector<std::string_view> lines(std::string_view text) {
    auto out = split(text, '\n');
    for (auto& line : out) {
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
    }
    if (!out.empty() && out.back().empty()) {
        out.pop_back();
    }
    return out;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    double value = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (s.empty() || ec != std::errc{} || ptr != end) {
        return std::nullopt;
    }
    return value;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s) {
    s = trim(s);
    Int value{};
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (s.empty() || ec != std::errc{} || ptr != end) {
        return std::nullopt;
    }
    return value;
}

/// 17 significant digits: every finite double round-trips exactly.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Short fixed-precision rendering for human-facing reports.
inline std::string format_fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i != 0) {
            out += sep;
        }
        out += parts[i];
    }
    return out;
}

}  // namespace hierlogit::detail

#include "hierlogit/error.hpp"

namespace hierlogit::detail {

/// Whitespace tokens of one line.
inline std::vector<std::string_view> tokens(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) {
            ++i;
        }
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') {
            ++i;
        }
        if (i > start) {
            out.push_back(line.substr(start, i - start));
        }
    }
    return out;
}

/// Sequential reader over the non-blank lines of a versioned text file.
class LineCursor {
public:
    explicit LineCursor(std::string_view text) : lines_(lines(text)) {}

    bool done() {
        skip_blank();
        return pos_ >= lines_.size();
    }

    /// Tokens of the next non-blank line; the first must equal `keyword` when given.
    std::vector<std::string_view> next(std::string_view keyword = {}) {
        if (done()) {
            fail("unexpected end of input");
        }
        auto toks = tokens(lines_[pos_++]);
        if (!keyword.empty() && toks.front() != keyword) {
            fail("expected '" + std::string(keyword) + "', found '" + std::string(toks.front()) + "'");
        }
        return toks;
    }

    /// The next non-blank line verbatim.
    std::string_view raw() {
        if (done()) {
            fail("unexpected end of input");
        }
        return lines_[pos_++];
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(ParseError::Kind::Syntax, "line " + std::to_string(pos_) + ": " + msg);
    }

    double number(std::string_view tok) const {
        const auto v = parse_double(tok);
        if (!v) {
            fail("expected a number, found '" + std::string(tok) + "'");
        }
        return *v;
    }

    std::size_t index(std::string_view tok) const {
        const auto v = parse_int<std::size_t>(tok);
        if (!v) {
            fail("expected an index, found '" + std::string(tok) + "'");
        }
        return *v;
    }

private:
    void skip_blank() {
        while (pos_ < lines_.size() && trim(lines_[pos_]).empty()) {
            ++pos_;
        }
    }

    std::vector<std::string_view> lines_;
    std::size_t pos_ = 0;
};

}  // namespace hierlogit::detail

namespace hierlogit::detail {

/// Quotes a CSV field when it contains a comma, quote or newline.
inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) {
        return std::string(s);
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

/// Splits one CSV line honoring double-quoted fields.
inline std::vector<std::string> csv_split(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) {
        throw ParseError(ParseError::Kind::Syntax, "unterminated quoted CSV field");
    }
    out.push_back(std::move(cur));
    return out;
}

}  // namespace hierlogit::detail
