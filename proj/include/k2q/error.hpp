#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace k2q {

enum class ErrorKind {
  io,                  // file missing or unreadable
  parse,               // malformed record text
  schema,              // record shape or invariant violation
  dangling_reference,  // id points at nothing
  invalid_argument,    // precondition on a call was not met
  no_candidate,        // negative sampling found nothing to draw from
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

enum class Severity { warning, error };

const char* to_string(Severity severity);

/// A problem found by one of the validators. `location` is a field path such
/// as `rcpt-0001/entities[3].type_name`.
struct Issue {
  Severity severity = Severity::error;
  std::string location;
  std::string message;

  bool operator==(const Issue&) const = default;
};

bool has_errors(const std::vector<Issue>& issues, bool warnings_are_errors = false);

}  // namespace k2q
