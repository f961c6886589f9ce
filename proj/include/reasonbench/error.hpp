#pragma once

#include <stdexcept>
#include <string>

namespace reasonbench {

/// Base of every domain error the harness raises on purpose. Anything else
/// escaping a stage is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedRecord : public Error {
 public:
  MalformedRecord(int line, const std::string& reason)
      : Error("malformed record at line " + std::to_string(line) + ": " + reason), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class UnknownFormat : public Error { using Error::Error; };
class DuplicateId : public Error { using Error::Error; };
class NoIoPairTests : public Error { using Error::Error; };
class SandboxUnavailable : public Error { using Error::Error; };
class HarnessError : public Error { using Error::Error; };
class SiteStale : public Error { using Error::Error; };
class ExhaustedRules : public Error { using Error::Error; };
class MissingExtras : public Error { using Error::Error; };
class NoOutputSection : public Error { using Error::Error; };
class NoParseableCode : public Error { using Error::Error; };
class RateLimited : public Error { using Error::Error; };
class AuthFailure : public Error { using Error::Error; };
class ReplayMiss : public Error { using Error::Error; };
class Exhausted : public Error { using Error::Error; };
class EmptyInput : public Error { using Error::Error; };
class ConstraintViolation : public Error { using Error::Error; };
class DegenerateInput : public Error { using Error::Error; };
class OutOfUniverse : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

class MalformedRow : public Error {
 public:
  MalformedRow(int row, const std::string& reason)
      : Error("malformed row " + std::to_string(row) + ": " + reason), row_(row) {}
  int row() const { return row_; }

 private:
  int row_;
};

}  // namespace reasonbench
