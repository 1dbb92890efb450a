#pragma once

#include <stdexcept>
#include <string>

namespace qsc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class NormalizationError : public Error {
public:
    using Error::Error;
};

class DegenerateChannelError : public Error {
public:
    using Error::Error;
};

class ProtocolStateError : public Error {
public:
    using Error::Error;
};

class KeyExhaustedError : public Error {
public:
    KeyExhaustedError(std::size_t requested, std::size_t available)
        : Error("key exhausted: requested " + std::to_string(requested) + " bits, " +
                std::to_string(available) + " available"),
          requested_(requested),
          available_(available) {}

    std::size_t requested() const noexcept { return requested_; }
    std::size_t available() const noexcept { return available_; }

private:
    std::size_t requested_;
    std::size_t available_;
};

class CalibrationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Raised by simulate_run when the codec fails on a particular cloud.
class RunError : public Error {
public:
    RunError(std::string cloud_id, const std::string& what)
        : Error("cloud '" + cloud_id + "': " + what), cloud_id_(std::move(cloud_id)) {}

    const std::string& cloud_id() const noexcept { return cloud_id_; }

private:
    std::string cloud_id_;
};

/// Configuration problem tied to a JSON field path such as "channel.mu_signal".
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace qsc
