#pragma once

#include <stdexcept>
#include <string>

namespace xsec {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Shape or index disagreement between tensors/layers.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Violated value precondition (non-finite input, bad label, empty set, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Malformed input file; message carries line/field/offset context.
class ParseError : public Error {
public:
    using Error::Error;
};

// A computation whose result is undefined on this input
// ("degenerate-neighborhood", "degenerate-quartiles", "nothing-to-explain").
class DegenerateError : public Error {
public:
    using Error::Error;
};

} // namespace xsec
