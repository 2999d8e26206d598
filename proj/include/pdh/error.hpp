#pragma once

#include <stdexcept>
#include <string>

namespace pdh {

// Error categories double as the CLI exit-code map.
enum class ErrorKind {
    Configuration = 2,
    Ingestion = 3,
    Numeric = 4,
    Evaluation = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Configuration, what) {}
};

struct IngestionError : Error {
    explicit IngestionError(const std::string& what) : Error(ErrorKind::Ingestion, what) {}
};

// Malformed raster or binary file; carries the byte offset of the problem.
struct FormatError : IngestionError {
    FormatError(const std::string& what, std::size_t offset)
        : IngestionError(what + " (at byte " + std::to_string(offset) + ")"), offset(offset) {}
    std::size_t offset;
};

// Shape disagreement between tensors, codes, or layers.
struct DimensionError : Error {
    explicit DimensionError(const std::string& what) : Error(ErrorKind::Ingestion, what) {}
};

// Value outside the domain an operation accepts (e.g. a relaxed code outside [0,1]).
struct DomainError : Error {
    explicit DomainError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

// Operation invoked in the wrong order, e.g. backward without a matching forward.
struct StateError : Error {
    explicit StateError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

struct TrainingDivergence : Error {
    TrainingDivergence(const std::string& what, int epoch)
        : Error(ErrorKind::Numeric, what), epoch(epoch) {}
    int epoch;
};

// The label set admits no valid (anchor, positive, negative) triplet.
struct InfeasibleSampling : Error {
    explicit InfeasibleSampling(const std::string& what) : Error(ErrorKind::Configuration, what) {}
};

struct EvaluationError : Error {
    explicit EvaluationError(const std::string& what) : Error(ErrorKind::Evaluation, what) {}
};

}  // namespace pdh
