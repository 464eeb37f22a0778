#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace revcurl {

// Root of every error thrown by the library. `code()` is a short stable token
// used by the CLI when it prints machine-parseable error lines.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* code() const noexcept { return "error"; }
};

class PreconditionError : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "precondition"; }
};

// Raised by an environment when it is driven outside its contract
// (e.g. stepped after a terminal transition).
class ContractViolation : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "contract"; }
};

// The environment produced something unusable (non-finite observation).
class EnvironmentFault : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "environment"; }
};

class ShapeError : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "shape"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "config"; }
};

class OracleBudgetError : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "oracle_budget"; }
};

class IndexingFault : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "indexing"; }
};

// Non-finite value met during a numerical operation. `layer()` is the layer
// index involved, or npos when the fault is not tied to a layer.
class NumericalFault : public Error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit NumericalFault(const std::string& what, std::size_t layer = npos)
      : Error(what), layer_(layer) {}

  const char* code() const noexcept override { return "numerical"; }
  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

// A parameter magnitude exceeded the divergence bound during training.
class DivergenceFault : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "divergence"; }
};

}  // namespace revcurl
