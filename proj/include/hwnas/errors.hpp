#pragma once

#include <stdexcept>
#include <string>

namespace hwnas {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// genotype
class UnsatisfiableSpace : public Error {
 public:
  using Error::Error;
};
class FormatError : public Error {
 public:
  using Error::Error;
};

// hw_model
class OverflowError : public Error {
 public:
  using Error::Error;
};

// toy_model
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};
class NumericalDivergence : public Error {
 public:
  using Error::Error;
};

// eps_select
class DegenerateCurve : public Error {
 public:
  using Error::Error;
};

// nsga2
class LayoutMismatch : public Error {
 public:
  using Error::Error;
};
class BadReference : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};

// evaluator backends
class EvaluatorError : public Error {
 public:
  using Error::Error;
};
class ProtocolError : public EvaluatorError {
 public:
  using EvaluatorError::EvaluatorError;
};
class TimeoutError : public EvaluatorError {
 public:
  using EvaluatorError::EvaluatorError;
};
class WorkerExit : public EvaluatorError {
 public:
  using EvaluatorError::EvaluatorError;
};

}  // namespace hwnas
