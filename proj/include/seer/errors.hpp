#pragma once

#include <stdexcept>
#include <string>

namespace seer {

// Base of all library errors. The CLI maps subclasses onto exit codes:
// configuration 2, data/format 3, everything else 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration value or precondition on user-supplied settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A pose or query point lies outside the road corridor.
class OutOfBoundsError : public Error {
 public:
  using Error::Error;
};

// Scene cannot hold the requested number of vehicles.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Maneuver has no feasible target (e.g. lane change beyond the edge lane).
class InfeasibleIntentionError : public Error {
 public:
  using Error::Error;
};

// Corrupt, truncated or wrong-version file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid payload values (bad label index, empty dataset, mismatched dims).
class DataError : public Error {
 public:
  using Error::Error;
};

// Training diverged or could not run.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Wire message violates the stream schema.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// API contract violation (empty vote window and friends).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Server could not bind or start.
class StartupError : public Error {
 public:
  using Error::Error;
};

}  // namespace seer
