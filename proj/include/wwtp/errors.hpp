#pragma once

#include <stdexcept>
#include <string>

namespace wwtp {

// Invalid physical input: negative flows, non-finite states, and the like.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// API misuse: step after done, shape mismatch, index out of range.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid or unknown configuration values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite losses or parameters during training.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wwtp
