#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ratstab {

/// Root of every error the toolkit throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: dimensions, step sizes, config fields.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition (non-symmetric input, short series, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Gain matrix is not Hurwitz, or a Lyapunov solve produced no positive definite solution.
class NotHurwitz : public Error {
 public:
  using Error::Error;
};

/// Structural problems with a nonlinearity (triangularity, f(0,0,u) != 0, unknown registry name).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

class NoFeasibleTheta : public Error {
 public:
  using Error::Error;
};

class ConditionsNotSatisfied : public Error {
 public:
  using Error::Error;
};

class PreconditionViolated : public Error {
 public:
  using Error::Error;
};

/// Simulation left the finite/bounded region. `time()` is the first offending grid time.
class Diverged : public Error {
 public:
  explicit Diverged(double t)
      : Error("simulation diverged at t = " + std::to_string(t)), time_(t) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class IoError : public Error {
 public:
  IoError(const std::string& what, std::string path)
      : Error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace ratstab
