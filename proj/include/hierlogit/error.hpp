#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hierlogit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (hierarchy files, CSV, model files, config).
class ParseError : public Error {
public:
    enum class Kind {
        Syntax,
        MissingHeader,
        DuplicateNode,
        MultipleParents,
        MultipleRoots,
        Cycle,
        OrphanNode,
        TerminalMismatch,
        RaggedRow,
        NonNumeric,
        UnknownLabel,
        Version,
    };

    ParseError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// A precondition on arguments was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// The optimizer produced a non-finite loss for estimator (conditioning, target).
class FitError : public Error {
public:
    FitError(std::size_t conditioning, std::size_t target, const std::string& what)
        : Error(what), conditioning_(conditioning), target_(target) {}

    std::size_t conditioning() const noexcept { return conditioning_; }
    std::size_t target() const noexcept { return target_; }

private:
    std::size_t conditioning_;
    std::size_t target_;
};

}  // namespace hierlogit
