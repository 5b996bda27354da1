#pragma once

#include <stdexcept>
#include <string>

namespace ehsim {

// Precondition or validation failure caused by caller input. The CLI maps
// these to exit status 1.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Configuration file problem; carries the offending key and source line.
class ConfigError : public InvalidArgument {
 public:
  ConfigError(const std::string& key, int line, const std::string& what)
      : InvalidArgument(format(key, line, what)), key_(key), line_(line) {}

  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  static std::string format(const std::string& key, int line, const std::string& what) {
    std::string out = "config error";
    if (!key.empty()) out += " at key '" + key + "'";
    if (line > 0) out += " (line " + std::to_string(line) + ")";
    return out + ": " + what;
  }

  std::string key_;
  int line_;
};

// Failure during a run (I/O, missing upstream artifact, numerical trouble).
// The CLI maps these to exit status 2.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingArtifact : public RuntimeError {
 public:
  MissingArtifact(const std::string& path, const std::string& producer)
      : RuntimeError("missing upstream artifact '" + path + "'; run `ehsim " + producer +
                     "` first"),
        producer_(producer) {}

  const std::string& producer() const { return producer_; }

 private:
  std::string producer_;
};

}  // namespace ehsim
