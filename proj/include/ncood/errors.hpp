#pragma once

#include <stdexcept>
#include <string>

namespace ncood {

// Base class for every error raised by this library. The CLI maps each
// subclass to a distinct process exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Violated precondition or malformed argument (shape mismatch, non-finite
// entries, out-of-range label, bad config value).
class InvalidInputError : public Error {
public:
    using Error::Error;
};

// Structurally valid input on which the requested quantity is undefined
// (zero mean norm in a coefficient of variation, coincident class means,
// constant series in a correlation).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

// Loss became non-finite during training. Carries the epoch at which the
// divergence was detected.
class TrainingDivergedError : public Error {
public:
    TrainingDivergedError(const std::string& what, int epoch)
        : Error(what), epoch_(epoch) {}
    explicit TrainingDivergedError(int epoch)
        : Error("training diverged at epoch " + std::to_string(epoch)), epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

// No jitter value in the ladder produced factorizable class covariances.
class FitFailedError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// An artifact referenced by a manifest is missing or its content hash does
// not match the recorded one.
class IntegrityError : public Error {
public:
    using Error::Error;
};

} // namespace ncood
