#pragma once

#include <stdexcept>
#include <string>

namespace lumen3d {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed or contradictory job configuration (CLI exit code 2).
class ConfigError : public Error
{
  public:
    using Error::Error;
};

/// Input data that cannot be processed: unreadable files, failed
/// preconditions on rasters or light sets (CLI exit code 3).
class DataError : public Error
{
  public:
    using Error::Error;
};

} // namespace lumen3d
