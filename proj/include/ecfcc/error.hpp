#pragma once

#include <stdexcept>
#include <string>

namespace ecfcc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent dimensions, non-PD weights, malformed scenario files.
class ConfigError : public Error
{
public:
  using Error::Error;
};

class DimensionError : public ConfigError
{
public:
  using ConfigError::ConfigError;
};

class InsufficientDataError : public Error
{
public:
  using Error::Error;
};

/// A zero smoothing variance leaves the CDF discontinuous and the
/// inversion integral without decay.
class DegenerateSmoothingError : public Error
{
public:
  using Error::Error;
};

/// Quadrature did not reach the requested tolerance.
class AccuracyError : public Error
{
public:
  AccuracyError(const std::string& what, double achieved)
    : Error(what)
    , achieved_(achieved)
  {
  }
  double achieved() const { return achieved_; }

private:
  double achieved_;
};

class ToleranceError : public Error
{
public:
  using Error::Error;
};

/// No concave region could be found at the right end of a CDF table.
class RestrictionError : public Error
{
public:
  using Error::Error;
};

class DomainError : public Error
{
public:
  using Error::Error;
};

class PreconditionError : public Error
{
public:
  using Error::Error;
};

/// Wraps an error raised inside one pipeline stage, optionally for one
/// constraint row.
class StageError : public Error
{
public:
  StageError(std::string stage, int row, const std::string& what)
    : Error(compose(stage, row, what))
    , stage_(std::move(stage))
    , row_(row)
  {
  }
  const std::string& stage() const { return stage_; }
  int row() const { return row_; }

private:
  static std::string compose(const std::string& stage, int row, const std::string& what)
  {
    std::string msg = "stage '" + stage + "'";
    if (row >= 0)
      msg += " (row " + std::to_string(row) + ")";
    return msg + ": " + what;
  }

  std::string stage_;
  int row_;
};

} // namespace ecfcc
