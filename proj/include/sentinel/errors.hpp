#pragma once

#include <stdexcept>
#include <string>

namespace sentinel {

// Stable error identifiers, also used as CLI exit codes (see tools/main.cpp).
enum class ErrorKind {
    Internal = 1,
    Usage = 2,
    MissingFile = 3,
    ParseError = 4,
    SchemaError = 5,
    DimMismatch = 6,
    EmbedService = 7,
    InvalidInput = 8,
    UndefinedMetric = 9,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string name, const std::string& message)
        : std::runtime_error(name + ": " + message), kind_(kind), name_(std::move(name)) {}

    ErrorKind kind() const { return kind_; }
    const std::string& name() const { return name_; }

private:
    ErrorKind kind_;
    std::string name_;
};

struct MissingFileError : Error {
    explicit MissingFileError(const std::string& msg) : Error(ErrorKind::MissingFile, "MissingFile", msg) {}
};

// Malformed JSON. Carries 1-based line/column of the offending byte.
struct ParseError : Error {
    ParseError(const std::string& msg, int line, int column)
        : Error(ErrorKind::ParseError, "ParseError",
                msg + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
          line(line), column(column) {}
    int line;
    int column;
};

// Structurally valid JSON that violates a file schema; names the field.
struct SchemaError : Error {
    explicit SchemaError(const std::string& field, const std::string& msg)
        : Error(ErrorKind::SchemaError, "SchemaError", "field '" + field + "': " + msg), field(field) {}
    std::string field;
};

struct DimMismatchError : Error {
    explicit DimMismatchError(const std::string& msg) : Error(ErrorKind::DimMismatch, "DimMismatch", msg) {}
};

struct EmbedServiceError : Error {
    explicit EmbedServiceError(const std::string& msg) : Error(ErrorKind::EmbedService, "EmbedServiceError", msg) {}
};

struct InvalidSizeError : Error {
    explicit InvalidSizeError(const std::string& msg) : Error(ErrorKind::InvalidInput, "InvalidSize", msg) {}
};

struct InvalidParamError : Error {
    explicit InvalidParamError(const std::string& msg) : Error(ErrorKind::InvalidInput, "InvalidParam", msg) {}
};

struct UnknownAgentError : Error {
    explicit UnknownAgentError(const std::string& msg) : Error(ErrorKind::InvalidInput, "UnknownAgent", msg) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(ErrorKind::InvalidInput, "ShapeError", msg) {}
};

struct InvalidGraphError : Error {
    explicit InvalidGraphError(const std::string& msg) : Error(ErrorKind::InvalidInput, "InvalidGraph", msg) {}
};

struct InvalidNegativeError : Error {
    explicit InvalidNegativeError(const std::string& msg)
        : Error(ErrorKind::InvalidInput, "InvalidNegative", msg) {}
};

struct InsufficientDataError : Error {
    explicit InsufficientDataError(const std::string& msg)
        : Error(ErrorKind::InvalidInput, "InsufficientData", msg) {}
};

struct UndefinedMetricError : Error {
    explicit UndefinedMetricError(const std::string& msg)
        : Error(ErrorKind::UndefinedMetric, "UndefinedMetric", msg) {}
};

} // namespace sentinel
