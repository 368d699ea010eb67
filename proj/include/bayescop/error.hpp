#pragma once

#include <stdexcept>
#include <string>

namespace bayescop {

// Parameter or argument outside the domain of a family or operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A sampler detected a broken internal invariant (e.g. a latent outside its bounds).
class SamplerInvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A quantity required by an estimator is unavailable (empty stream, too few iterates).
class InferenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid run configuration or input data; carries the offending line when known.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what, int line = -1)
      : std::runtime_error(line >= 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

// Malformed chain file.
class ChainFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bayescop
