#pragma once

#include <stdexcept>

namespace nowcast {

// Error taxonomy shared by every module. The CLI maps ShapeError,
// ContractError and ConfigError to exit code 1, IoError and FormatError
// to exit code 2.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
  using Error::Error;
};
struct ContractError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

}  // namespace nowcast
