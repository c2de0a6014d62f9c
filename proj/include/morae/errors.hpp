#pragma once

#include <stdexcept>
#include <string>

namespace morae {

// Root of every error the engine raises. Callers that only care about
// "something went wrong in the agent" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Snapshot / fixture / dataset documents that do not match their schema.
// `path()` is a JSONPath-like location such as `$.children[0].tag`.
class ParseError : public Error {
 public:
  ParseError(std::string path, const std::string& what)
      : Error("parse error at " + path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class StructureError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

// Transport failures talking to a model endpoint (after retries).
class GatewayError : public Error {
 public:
  using Error::Error;
};

class CredentialError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

// The model answered, but not in the grammar we asked for.
class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& what, std::string raw)
      : Error(what), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class EnvironmentError : public Error {
 public:
  using Error::Error;
};

class TargetError : public EnvironmentError {
 public:
  using EnvironmentError::EnvironmentError;
};

// The agent asked for an action the recording never saw.
class DivergenceError : public EnvironmentError {
 public:
  using EnvironmentError::EnvironmentError;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error("invalid answer for '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class StaleFormError : public Error {
 public:
  using Error::Error;
};

class StepBudgetError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class BusyError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class IntegrityError : public Error {
 public:
  using Error::Error;
};

class SetupError : public Error {
 public:
  using Error::Error;
};

}  // namespace morae
