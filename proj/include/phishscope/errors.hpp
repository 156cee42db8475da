#pragma once

#include <stdexcept>
#include <string>

namespace phishscope {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// email_ingest
class MalformedMessage : public Error {
public:
    using Error::Error;
};

// token_budget
class UnknownTokenizer : public Error {
public:
    explicit UnknownTokenizer(const std::string& name)
        : Error("unknown tokenizer: " + name), name_(name) {}
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

// simplifier
class NoBody : public Error {
public:
    NoBody() : Error("email has no body parts") {}
};

class BudgetUnreachable : public Error {
public:
    using Error::Error;
};

// llm_gateway
class TransportError : public Error {
public:
    using Error::Error;
};

class AuthError : public Error {
public:
    using Error::Error;
};

class ProviderRefusal : public Error {
public:
    ProviderRefusal(int status, const std::string& what)
        : Error(what), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

/// A structured response did not match the declared schema.
class SchemaViolation : public Error {
public:
    SchemaViolation(std::string field, const std::string& detail)
        : Error("schema violation on '" + field + "': " + detail), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class Unparseable : public Error {
public:
    using Error::Error;
};

// verdict
class InvalidScore : public Error {
public:
    using Error::Error;
};

class RationalesTooLong : public Error {
public:
    using Error::Error;
};

class MissingField : public Error {
public:
    MissingField(std::string field)
        : Error("missing required field: " + field), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// evaluation
class EmptyDataset : public Error {
public:
    using Error::Error;
};

class FailureCeilingExceeded : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace phishscope
