#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kontext {

/// Base class of every domain error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// A structurally invalid model or argument.
class InvalidModel : public Error
{
public:
  using Error::Error;
};

/// An enumeration or search exceeded its configured budget.
class SizeLimit : public Error
{
public:
  using Error::Error;
};

/// Rejection sampling ran out of attempts.
class Exhausted : public Error
{
public:
  using Error::Error;
};

class ParseError : public Error
{
public:
  ParseError(std::string const &what, std::size_t line)
    : Error("line " + std::to_string(line) + ": " + what)
    , line_(line)
  {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class UnknownToken : public ParseError
{
public:
  using ParseError::ParseError;
};

class EmptyModel : public Error
{
public:
  using Error::Error;
};

class DimensionMismatch : public Error
{
public:
  using Error::Error;
};

class DegenerateInit : public Error
{
public:
  using Error::Error;
};

class ZeroPrefix : public Error
{
public:
  using Error::Error;
};

class Diverged : public Error
{
public:
  using Error::Error;
};

}  // namespace kontext
