#pragma once

#include <stdexcept>
#include <string>

namespace egat {

// Error categories; the CLI maps these onto process exit codes.
enum class ErrorKind {
  config,     // bad parameters or inconsistent configuration (exit 2)
  data,       // malformed or semantically invalid input data (exit 3)
  numerical,  // non-finite values, divergence (exit 4)
  shape,      // tensor dimension mismatch
  index,      // out-of-range ids
  internal,   // broken internal invariant
  statistics, // a summary statistic is undefined for the given sample (exit 2)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};
struct DataError : Error {
  explicit DataError(const std::string& w) : Error(ErrorKind::data, w) {}
};
struct NumericalError : Error {
  explicit NumericalError(const std::string& w) : Error(ErrorKind::numerical, w) {}
};
struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error(ErrorKind::shape, w) {}
};
struct IndexError : Error {
  explicit IndexError(const std::string& w) : Error(ErrorKind::index, w) {}
};
struct StatError : Error {
  explicit StatError(const std::string& w) : Error(ErrorKind::statistics, w) {}
};
struct InternalError : Error {
  explicit InternalError(const std::string& w) : Error(ErrorKind::internal, w) {}
};

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::statistics:
      return 2;
    case ErrorKind::data:
      return 3;
    case ErrorKind::numerical:
      return 4;
    default:
      return 1;
  }
}

}  // namespace egat
