#pragma once

#include <stdexcept>
#include <string>

namespace dlo {

// Bad sizes passed across a module boundary (vector lengths, layer shapes).
class DimensionError : public std::runtime_error {
public:
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration values (non-positive sizes, gamma outside (0,1), ...).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// API misuse that is not a dimension problem (empty batch, m out of range, ...).
class UsageError : public std::runtime_error {
public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// The integrator blew up; carries the substep at which it was detected.
class SimDivergenceError : public std::runtime_error {
public:
  SimDivergenceError(const std::string& what, int substep)
      : std::runtime_error(what), substep_(substep) {}
  int substep() const { return substep_; }

private:
  int substep_;
};

// A parameter or loss left the finite range during an update.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// File parse/version problems on datasets, checkpoints, configs.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Resample budget exhausted while generating a dataset.
class GenerationError : public std::runtime_error {
public:
  explicit GenerationError(const std::string& what) : std::runtime_error(what) {}
};

// A file declares a format version this build does not understand.
class VersionError : public IoError {
public:
  explicit VersionError(const std::string& what) : IoError(what) {}
};

// Stored content fails its own declared checksum or size.
class IntegrityError : public IoError {
public:
  explicit IntegrityError(const std::string& what) : IoError(what) {}
};

}  // namespace dlo
