#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace zfdt {

/// Base of every error raised by the engine. `kind()` is a stable tag used by
/// the CLI and the HTTP service to map failures onto exit codes and statuses.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define ZFDT_DEFINE_ERROR(Name)                                                  \
    class Name : public Error {                                                  \
    public:                                                                      \
        explicit Name(const std::string& message) : Error(#Name, message) {}     \
    }

ZFDT_DEFINE_ERROR(InvalidInput);
ZFDT_DEFINE_ERROR(ConfigError);
ZFDT_DEFINE_ERROR(IoError);
ZFDT_DEFINE_ERROR(EmptyCorpus);
ZFDT_DEFINE_ERROR(EmptyGraph);
ZFDT_DEFINE_ERROR(UnknownEntity);
ZFDT_DEFINE_ERROR(DimensionError);
ZFDT_DEFINE_ERROR(EmptyIndex);
ZFDT_DEFINE_ERROR(NoLocalAnswers);
ZFDT_DEFINE_ERROR(DegeneratePair);
ZFDT_DEFINE_ERROR(InvalidWeights);
ZFDT_DEFINE_ERROR(PreconditionError);
ZFDT_DEFINE_ERROR(AssumptionError);
ZFDT_DEFINE_ERROR(InsufficientData);
ZFDT_DEFINE_ERROR(WorkspaceError);

#undef ZFDT_DEFINE_ERROR

/// Transport or protocol failure talking to a remote model endpoint.
class ClientError : public Error {
public:
    ClientError(const std::string& message, int attempts)
        : Error("ClientError", message + " (after " + std::to_string(attempts) + " attempts)"),
          attempts_(attempts) {}

    int attempts() const noexcept { return attempts_; }

protected:
    ClientError(std::string kind, const std::string& message, int attempts)
        : Error(std::move(kind), message + " (after " + std::to_string(attempts) + " attempts)"),
          attempts_(attempts) {}

private:
    int attempts_;
};

/// The endpoint rate-limited every attempt; callers may retry later.
class RetryableError : public ClientError {
public:
    RetryableError(const std::string& message, int attempts)
        : ClientError("RetryableError", message, attempts) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t line)
        : Error("ParseError", "line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class SchemaError : public Error {
public:
    SchemaError(std::string field, std::size_t line)
        : Error("SchemaError", "line " + std::to_string(line) + ": missing or invalid field '" + field + "'"),
          field_(std::move(field)), line_(line) {}

    const std::string& field() const noexcept { return field_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string field_;
    std::size_t line_;
};

class ExtractionError : public Error {
public:
    ExtractionError(long long chunk_id, const std::string& message)
        : Error("ExtractionError", "chunk " + std::to_string(chunk_id) + ": " + message),
          chunk_id_(chunk_id) {}

    long long chunk_id() const noexcept { return chunk_id_; }

private:
    long long chunk_id_;
};

class SummarizeError : public Error {
public:
    SummarizeError(long long community_id, const std::string& message)
        : Error("SummarizeError", "community " + std::to_string(community_id) + ": " + message),
          community_id_(community_id) {}

    long long community_id() const noexcept { return community_id_; }

private:
    long long community_id_;
};

/// Retrieval pipeline failure; `stage()` names the stage that could not recover.
class PipelineError : public Error {
public:
    PipelineError(std::string stage, const std::string& message)
        : Error("PipelineError", stage + ": " + message), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace zfdt
