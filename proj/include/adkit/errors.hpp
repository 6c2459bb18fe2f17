#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adkit {

/// Bad or inconsistent run configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dataset layout or image decoding problems (CLI exit code 3).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Checkpoint file missing (CLI exit code 4).
struct MissingCheckpoint : std::runtime_error {
    explicit MissingCheckpoint(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed checkpoint contents; carries the byte offset where parsing failed.
struct CheckpointParseError : std::runtime_error {
    size_t offset;
    CheckpointParseError(const std::string& msg, size_t off)
        : std::runtime_error(msg + " (at byte offset " + std::to_string(off) + ")"), offset(off) {}
};

}  // namespace adkit
