#pragma once

#include <stdexcept>
#include <string>

namespace datta {

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string &msg) : std::runtime_error("ShapeError: " + msg) {}
};

struct FormatError : std::runtime_error {
    explicit FormatError(const std::string &msg) : std::runtime_error("FormatError: " + msg) {}
};

struct DomainOverlap : std::runtime_error {
    explicit DomainOverlap(const std::string &msg) : std::runtime_error("DomainOverlap: " + msg) {}
};

struct UnknownDomain : std::runtime_error {
    explicit UnknownDomain(const std::string &msg) : std::runtime_error("UnknownDomain: " + msg) {}
};

struct EmptyDataset : std::runtime_error {
    explicit EmptyDataset(const std::string &msg) : std::runtime_error("EmptyDataset: " + msg) {}
};

struct ShapeMismatch : std::runtime_error {
    explicit ShapeMismatch(const std::string &msg) : std::runtime_error("ShapeMismatch: " + msg) {}
};

// Training aborts with the step index that produced a non-finite loss.
struct NonFiniteLoss : std::runtime_error {
    long long step;
    explicit NonFiniteLoss(long long step_index)
        : std::runtime_error("NonFiniteLoss at step " + std::to_string(step_index)), step(step_index) {}
};

} // namespace datta
