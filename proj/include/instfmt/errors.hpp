#pragma once

#include <stdexcept>
#include <string>

namespace instfmt {

/// Base class for every error raised by the toolchain.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: malformed record, invalid mask code, violated precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Endpoint failed after exhausting the retry budget, or returned a
/// non-retryable status.
class EndpointError : public Error {
public:
    EndpointError(const std::string& what, std::string request_id, int status)
        : Error(what), request_id_(std::move(request_id)), status_(status) {}

    const std::string& request_id() const noexcept { return request_id_; }
    int status() const noexcept { return status_; }

private:
    std::string request_id_;
    int status_;
};

/// Endpoint answered, but the body does not follow the completions schema.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// Endpoint lacks a feature the caller needs (e.g. echo logprobs).
class CapabilityError : public Error {
public:
    using Error::Error;
};

}  // namespace instfmt
