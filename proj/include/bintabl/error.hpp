#pragma once

#include <stdexcept>
#include <string>

namespace bintabl {

// Error categories map onto CLI exit codes (see tools/bintabl_cli.cpp).
enum class ErrorCategory { Config = 2, Data = 3, Numeric = 4, Contract = 5 };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

/// Operand shapes do not conform.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(ErrorCategory::Contract, what) {}
};

/// A caller broke a documented precondition (stale cache, batch of one in
/// training-mode batch norm, ...).
class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error(ErrorCategory::Contract, what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::Config, what) {}
};

/// Malformed or insufficient input data.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

/// A non-numeric cell in a text matrix file.
class ParseError : public DataError {
public:
    ParseError(std::size_t row, std::size_t col, const std::string& cell)
        : DataError("parse error at (" + std::to_string(row) + "," + std::to_string(col) +
                    "): not a number: '" + cell + "'"),
          row_(row), col_(col) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t col() const noexcept { return col_; }

private:
    std::size_t row_;
    std::size_t col_;
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorCategory::Numeric, what) {}
};

}  // namespace bintabl
