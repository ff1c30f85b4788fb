#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace domus {

/// Root of every exception the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// DSL front end

class SyntaxError : public Error {
public:
    SyntaxError(std::size_t position, std::string expected, std::string found)
        : Error("syntax error at byte " + std::to_string(position) + ": expected " + expected +
                ", found " + (found.empty() ? std::string("end of input") : "'" + found + "'")),
          position_(position), expected_(std::move(expected)) {}

    std::size_t position() const noexcept { return position_; }
    const std::string& expected() const noexcept { return expected_; }

private:
    std::size_t position_;
    std::string expected_;
};

class UnknownName : public Error {
public:
    using Error::Error;
};

class RecursionError : public Error {
public:
    using Error::Error;
};

class BadLiteral : public Error {
public:
    using Error::Error;
};

// execution

class OutOfBounds : public Error {
public:
    using Error::Error;
};

class BudgetExceeded : public Error {
public:
    using Error::Error;
};

class DepthExceeded : public Error {
public:
    using Error::Error;
};

// analyses

class EnumerationBudgetExceeded : public Error {
public:
    using Error::Error;
};

class EmptyStructure : public Error {
public:
    EmptyStructure() : Error("structure has no occupied cells") {}
};

class TooSmall : public Error {
public:
    using Error::Error;
};

class AlreadyUnstable : public Error {
public:
    using Error::Error;
};

/// Malformed structure, dictionary, or constraint file.
class FormatError : public Error {
public:
    using Error::Error;
};

} // namespace domus
