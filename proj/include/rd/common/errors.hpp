#pragma once

#include <stdexcept>
#include <string>

namespace rd {

// Invalid configuration or input files. CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training produced non-finite losses. CLI maps this to exit code 3.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unreadable or malformed checkpoint/artifact. CLI maps this to exit code 4.
class CorruptArtifactError : public std::runtime_error {
 public:
  explicit CorruptArtifactError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace rd
