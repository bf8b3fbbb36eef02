#pragma once

#include <stdexcept>
#include <string>

namespace bfd {

// Base for all library errors. Subclasses name the failure mode so callers
// and tests can catch precisely.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidParam : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct MissingFile : IoError {
    explicit MissingFile(const std::string& path) : IoError("missing file: " + path) {}
};
struct ParseError : IoError {
    using IoError::IoError;
};
struct NonFiniteSample : Error {
    NonFiniteSample(const std::string& path, std::size_t index)
        : Error("non-finite sample in " + path + " at index " + std::to_string(index)) {}
};
struct EmptyClass : Error {
    using Error::Error;
};
struct SignalTooShort : Error {
    SignalTooShort(std::size_t n, std::size_t window_len)
        : Error("signal length " + std::to_string(n) + " shorter than window " +
                std::to_string(window_len)) {}
};
struct DegenerateSegment : Error {
    using Error::Error;
};
struct EmptyTrainingSet : Error {
    using Error::Error;
};
struct ShapeMismatch : Error {
    using Error::Error;
};
struct IndexOutOfRange : Error {
    using Error::Error;
};
struct NotEnoughExperience : Error {
    NotEnoughExperience(std::size_t size, std::size_t batch)
        : Error("replay buffer holds " + std::to_string(size) + " transitions, need " +
                std::to_string(batch)) {}
};
struct StepAfterDone : Error {
    using Error::Error;
};
struct LengthMismatch : Error {
    using Error::Error;
};
struct MissingReport : Error {
    explicit MissingReport(const std::string& dir) : Error("no report.json in " + dir) {}
};

}  // namespace bfd
