#pragma once

#include <stdexcept>
#include <string>

namespace chunkvote {

/// Malformed input text (wrong column count, unbalanced brackets, bad tag syntax).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed input that breaks a tag-scheme or data-model invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gold and prediction do not cover the same sentences/tokens.
class AlignmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unusable parameters: unknown method, missing weights, too few sentences for the fold count.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (e.g. overlapping spans passed to collapse).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace chunkvote
