#pragma once

#include <stdexcept>
#include <string>

namespace ait {

/// Malformed document: the message names the offending JSON path.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Well-formed input that breaks a domain invariant.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& subject, const std::string& what)
      : std::runtime_error(subject + ": " + what), subject_(subject) {}
  const std::string& subject() const { return subject_; }

 private:
  std::string subject_;
};

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller broke a precondition of an operation.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace ait
