#include "k2q/error.hpp"

#include <algorithm>

namespace k2q {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::parse: return "parse";
    case ErrorKind::schema: return "schema";
    case ErrorKind::dangling_reference: return "dangling_reference";
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::no_candidate: return "no_candidate";
  }
  return "unknown";
}

const char* to_string(Severity severity) {
  return severity == Severity::error ? "error" : "warning";
}

bool has_errors(const std::vector<Issue>& issues, bool warnings_are_errors) {
  return std::any_of(issues.begin(), issues.end(), [&](const Issue& issue) {
    return issue.severity == Severity::error || warnings_are_errors;
  });
}

}  // namespace k2q
