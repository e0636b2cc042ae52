#pragma once

#include <stdexcept>
#include <string>

namespace qrrn {

/// Base class for every error raised by the library. `kind()` names the
/// failure category so callers (and the CLI) can branch without RTTI.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define QRRN_DEFINE_ERROR(Name)                                              \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string& what) : Error(#Name, what) {}       \
    }

// roadnet
QRRN_DEFINE_ERROR(SchemaError);
QRRN_DEFINE_ERROR(DanglingEdge);
QRRN_DEFINE_ERROR(DuplicateAction);
QRRN_DEFINE_ERROR(UnreachableGoal);
QRRN_DEFINE_ERROR(InvalidState);
QRRN_DEFINE_ERROR(InvalidAction);
QRRN_DEFINE_ERROR(BadParams);
QRRN_DEFINE_ERROR(NoPath);
QRRN_DEFINE_ERROR(InvalidRoute);

// env
QRRN_DEFINE_ERROR(EpisodeFinished);
QRRN_DEFINE_ERROR(InternalError);

// quantdist / policies
QRRN_DEFINE_ERROR(BadN);
QRRN_DEFINE_ERROR(BadAlpha);
QRRN_DEFINE_ERROR(TooFewActions);

// nn
QRRN_DEFINE_ERROR(DimMismatch);
QRRN_DEFINE_ERROR(BadDims);

// learner
QRRN_DEFINE_ERROR(EmptyBatch);
QRRN_DEFINE_ERROR(EmptyBuffer);

// oracle
QRRN_DEFINE_ERROR(NonterminatingPolicy);
QRRN_DEFINE_ERROR(TooFewSamples);

// trainer
QRRN_DEFINE_ERROR(ConfigError);
QRRN_DEFINE_ERROR(IoError);
QRRN_DEFINE_ERROR(VersionMismatch);
QRRN_DEFINE_ERROR(CorruptCheckpoint);

#undef QRRN_DEFINE_ERROR

}  // namespace qrrn
