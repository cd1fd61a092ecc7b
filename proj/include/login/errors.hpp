// Error taxonomy shared across the library. Each kind maps to a CLI exit code.
#pragma once

#include <stdexcept>
#include <string>

namespace login {

enum class ErrorKind {
  Config,     // bad config file / unknown key / invalid value
  Dataset,    // malformed dataset bundle
  Graph,      // graph-structural misuse (non-edge removal, edgeless ratio, ...)
  Numeric,    // shape mismatch, non-finite values, divergence
  Backend,    // consultant/encoder transport failure after retries
  CacheMiss,  // replay backend asked for an unrecorded prompt
  Guard,      // label-access or leakage guard tripped
  Internal,
};

class LoginError : public std::runtime_error {
 public:
  LoginError(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Transient transport failure; the consult retry loop only retries these.
class TransportError : public LoginError {
 public:
  explicit TransportError(const std::string& msg)
      : LoginError(ErrorKind::Backend, msg) {}
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw LoginError(kind, msg);
}

}  // namespace login
