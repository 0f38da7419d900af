#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mwpr {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// --- expression parsing / evaluation ---

class SyntaxError : public Error {
public:
    using Error::Error;
};

class UnsupportedTokenError : public Error {
public:
    using Error::Error;
};

class DivisionByZeroError : public Error {
public:
    DivisionByZeroError() : Error("division by zero") {}
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ContainsVariableError : public Error {
public:
    explicit ContainsVariableError(const std::string& name)
        : Error("expression contains variable '" + name + "'") {}
};

// --- corpus ---

class IoError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    SchemaError(std::size_t line, std::string field)
        : Error("schema violation at line " + std::to_string(line) + ": field '" + field + "'"),
          line_(line),
          field_(std::move(field)) {}
    std::size_t line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

class DuplicateIdError : public Error {
public:
    explicit DuplicateIdError(const std::string& id) : Error("duplicate problem id '" + id + "'") {}
};

class ParseFailure : public Error {
public:
    using Error::Error;
};

class MissingSignatureError : public Error {
public:
    explicit MissingSignatureError(const std::string& id)
        : Error("no graph signature available for problem '" + id + "'") {}
};

class BadFractionError : public Error {
public:
    using Error::Error;
};

// --- embeddings / numerics ---

class EmptyTextError : public Error {
public:
    EmptyTextError() : Error("cannot embed empty text") {}
};

class DimensionMismatchError : public Error {
public:
    using Error::Error;
};

class NonFiniteError : public Error {
public:
    using Error::Error;
};

class ZeroVectorError : public Error {
public:
    ZeroVectorError() : Error("zero vector has no direction") {}
};

// --- remote services ---

class TransportError : public Error {
public:
    using Error::Error;
};

class TimeoutError : public Error {
public:
    using Error::Error;
};

class ServiceError : public Error {
public:
    ServiceError(int status, std::string body_excerpt)
        : Error("service returned status " + std::to_string(status) + ": " + body_excerpt),
          status_(status),
          body_excerpt_(std::move(body_excerpt)) {}
    int status() const noexcept { return status_; }
    const std::string& body_excerpt() const noexcept { return body_excerpt_; }

private:
    int status_;
    std::string body_excerpt_;
};

// --- training ---

class EmptyPairsError : public Error {
public:
    EmptyPairsError() : Error("pair set is empty") {}
};

class BatchTooSmallError : public Error {
public:
    using Error::Error;
};

class BadStepSizeError : public Error {
public:
    using Error::Error;
};

// --- retrieval ---

class EmptyCorpusError : public Error {
public:
    EmptyCorpusError() : Error("corpus is empty") {}
};

class EmptyIndexError : public Error {
public:
    EmptyIndexError() : Error("retrieval index is empty") {}
};

class BadKError : public Error {
public:
    using Error::Error;
};

// --- prompting ---

class TemplateUnknownError : public Error {
public:
    explicit TemplateUnknownError(const std::string& id) : Error("unknown prompt template '" + id + "'") {}
};

class EmptyExemplarsError : public Error {
public:
    EmptyExemplarsError() : Error("few-shot prompt requires at least one exemplar") {}
};

// --- evaluation ---

class UnparseableNumberError : public Error {
public:
    using Error::Error;
};

class DegenerateInputError : public Error {
public:
    using Error::Error;
};

}  // namespace mwpr
