#pragma once

#include <stdexcept>
#include <string>

namespace lprobe {

/// Error category; the CLI maps each to a process exit code.
enum class ErrorKind {
  Validation,  // exit 2
  Io,          // exit 3
  Numerical,   // exit 4
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_validation(const std::string& what) {
  throw Error(ErrorKind::Validation, what);
}
[[noreturn]] inline void fail_io(const std::string& what) { throw Error(ErrorKind::Io, what); }
[[noreturn]] inline void fail_numerical(const std::string& what) {
  throw Error(ErrorKind::Numerical, what);
}

}  // namespace lprobe
