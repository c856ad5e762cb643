#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dhamsim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operands of incompatible size were combined.
class InvalidDimension : public Error {
 public:
  InvalidDimension(std::string what, std::size_t expected, std::size_t got)
      : Error(what + ": expected dimension " + std::to_string(expected) +
              ", got " + std::to_string(got)),
        expected_(expected),
        got_(got) {}
  std::size_t expected() const { return expected_; }
  std::size_t got() const { return got_; }

 private:
  std::size_t expected_;
  std::size_t got_;
};

/// A user supplied callback threw, returned a non-finite value, or returned
/// a vector of the wrong size.
class OracleError : public Error {
 public:
  using Error::Error;
};

/// The requested operation is not defined for this kind of dissipation
/// (e.g. a distance for a 2-homogeneous Rayleigh function).
class UnsupportedDissipation : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the effective domain of a dissipation function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Time stepping produced a non-finite state.
class NumericalBlowup : public Error {
 public:
  NumericalBlowup(std::string what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Malformed configuration document. `position` is a byte offset.
class ParseError : public Error {
 public:
  ParseError(std::string what, std::size_t position)
      : Error(what), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// A configuration is well-formed but violates the schema. `key()` names the
/// offending key.
class SchemaError : public Error {
 public:
  SchemaError(std::string key, std::string message)
      : Error(message), key_(std::move(key)) {}
  explicit SchemaError(const std::string& key) : Error(key), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Filesystem failure, carrying the path involved.
class IoError : public Error {
 public:
  IoError(std::string what, std::string path)
      : Error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace dhamsim
