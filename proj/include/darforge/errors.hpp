#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace darforge {

// Malformed external input (IDX, CIFAR, PPM, checkpoint, config file).
// Carries the byte offset where parsing gave up.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, size_t offset)
        : std::runtime_error(msg + " (at byte " + std::to_string(offset) + ")"),
          offset_(offset) {}

    size_t offset() const { return offset_; }

private:
    size_t offset_;
};

// Checkpoint integrity failure; names the failing field (magic, version,
// checksum, truncation).
class IntegrityError : public std::runtime_error {
public:
    IntegrityError(const std::string& field, const std::string& detail)
        : std::runtime_error("checkpoint integrity: " + field + ": " + detail),
          field_(field) {}

    const std::string& field() const { return field_; }

private:
    std::string field_;
};

// Bad run configuration (unknown key, unparsable value, missing required
// setting). Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Filesystem failure. Maps to CLI exit code 3.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace darforge
