#pragma once

#include <stdexcept>
#include <string>

namespace omr {

// Coarse failure class; maps 1:1 onto CLI exit codes and C API statuses.
enum class ErrorCode {
    config = 1,
    data = 2,
    divergence = 3,
    check = 4,
    internal = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorCode::config, w) {}
};
struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorCode::data, w) {}
};
struct ParseError : Error {
    explicit ParseError(const std::string& w) : Error(ErrorCode::data, w) {}
};
struct CycleError : Error {
    explicit CycleError(const std::string& w) : Error(ErrorCode::data, w) {}
};
struct MultiParentError : Error {
    explicit MultiParentError(const std::string& w) : Error(ErrorCode::data, w) {}
};
struct OrphanError : Error {
    explicit OrphanError(const std::string& w) : Error(ErrorCode::data, w) {}
};
struct UnknownNode : Error {
    explicit UnknownNode(const std::string& w) : Error(ErrorCode::data, w) {}
};
struct UnknownCode : Error {
    explicit UnknownCode(const std::string& w) : Error(ErrorCode::data, w) {}
};
struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& w) : Error(ErrorCode::data, w) {}
};
struct EmptyDomain : Error {
    explicit EmptyDomain(const std::string& w) : Error(ErrorCode::data, w) {}
};
struct EmptyKnowledgeBase : Error {
    explicit EmptyKnowledgeBase(const std::string& w) : Error(ErrorCode::data, w) {}
};
struct UndefinedMetric : Error {
    explicit UndefinedMetric(const std::string& w) : Error(ErrorCode::data, w) {}
};
struct DivergenceError : Error {
    explicit DivergenceError(const std::string& w) : Error(ErrorCode::divergence, w) {}
};
struct CheckFailure : Error {
    explicit CheckFailure(const std::string& w) : Error(ErrorCode::check, w) {}
};

}  // namespace omr
