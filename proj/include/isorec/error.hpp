#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace isorec {

// Precondition violations on public operations.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed or truncated files. The message always names the path and byte offset.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& path, std::uint64_t offset, const std::string& what)
        : std::runtime_error(path + " @ byte " + std::to_string(offset) + ": " + what),
          path_(path), offset_(offset) {}

    const std::string& path() const noexcept { return path_; }
    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::string path_;
    std::uint64_t offset_;
};

class IncompatibleCheckpoint : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite loss or a diverging parameter update.
class TrainingFailure : public std::runtime_error {
public:
    TrainingFailure(long step, const std::string& what)
        : std::runtime_error("training failed at step " + std::to_string(step) + ": " + what),
          step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

// Non-finite intermediate inside the reverse process.
class SamplingFailure : public std::runtime_error {
public:
    SamplingFailure(int timestep, int refine, const std::string& what)
        : std::runtime_error("sampling failed at t=" + std::to_string(timestep) + ", refine " +
                             std::to_string(refine) + ": " + what),
          timestep_(timestep), refine_(refine) {}
    int timestep() const noexcept { return timestep_; }
    int refine() const noexcept { return refine_; }

private:
    int timestep_;
    int refine_;
};

}  // namespace isorec
