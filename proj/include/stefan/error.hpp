#pragma once

#include <stdexcept>
#include <string>

namespace stefan {

enum class ErrorKind {
    InvalidArgument,
    FoldedMesh,
    NonPositiveRadius,
    SolverFailure,
    DegenerateSensitivity,
    Io,
    Config,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    // Step index of a time-stepping failure, -1 when not tied to a step.
    int step() const noexcept { return step_; }

    Error with_step(int step) const {
        Error e(kind_, "step " + std::to_string(step) + ": " + what());
        e.step_ = step;
        return e;
    }

private:
    ErrorKind kind_;
    int step_ = -1;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(ErrorKind::InvalidArgument, msg);
}

} // namespace stefan
