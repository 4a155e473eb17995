#pragma once

#include <stdexcept>
#include <string>

namespace refswap {

// Categories map one-to-one onto CLI exit codes (see exit_code()).
enum class ErrorKind {
  kValidation,    // bad config, invariant-violating input or edit
  kArgument,      // caller passed out-of-contract arguments
  kPrerequisite,  // a required upstream artifact is missing
  kTransport,     // model backend unreachable after retries
  kIo,            // file could not be read or written
  kNotFound,      // unknown id in a lookup
  kReviewedOut,   // instance removed by human review
  kSkip,          // instance fails a swap strategy precondition
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorKind::kValidation, what) {}
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what)
      : Error(ErrorKind::kArgument, what) {}
};

class PrerequisiteError : public Error {
 public:
  PrerequisiteError(const std::string& missing, const std::string& producer)
      : Error(ErrorKind::kPrerequisite,
              "missing prerequisite '" + missing + "' (produced by stage '" +
                  producer + "')"),
        missing_(missing),
        producer_(producer) {}

  const std::string& missing() const noexcept { return missing_; }
  const std::string& producer() const noexcept { return producer_; }

 private:
  std::string missing_;
  std::string producer_;
};

class TransportError : public Error {
 public:
  TransportError(const std::string& what, bool retriable)
      : Error(ErrorKind::kTransport, what), retriable_(retriable) {}

  bool retriable() const noexcept { return retriable_; }

 private:
  bool retriable_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& what)
      : Error(ErrorKind::kNotFound, what) {}
};

class ReviewedOutError : public Error {
 public:
  explicit ReviewedOutError(const std::string& instance_id)
      : Error(ErrorKind::kReviewedOut, "reviewed-out: " + instance_id),
        instance_id_(instance_id) {}

  const std::string& instance_id() const noexcept { return instance_id_; }

 private:
  std::string instance_id_;
};

// Thrown by swap strategies when an instance cannot be swapped. The instance
// is excluded and counted, never substituted.
class SwapSkip : public Error {
 public:
  SwapSkip(const std::string& instance_id, const std::string& reason)
      : Error(ErrorKind::kSkip, "skip " + instance_id + ": " + reason),
        instance_id_(instance_id),
        reason_(reason) {}

  const std::string& instance_id() const noexcept { return instance_id_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string instance_id_;
  std::string reason_;
};

// 0 success, 1 validation, 2 prerequisite, 3 transport.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kPrerequisite:
      return 2;
    case ErrorKind::kTransport:
      return 3;
    default:
      return 1;
  }
}

}  // namespace refswap
