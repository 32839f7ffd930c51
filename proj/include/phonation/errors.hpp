#pragma once

#include <stdexcept>
#include <string>

namespace phonation {

// Base class for every error raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// RIFF/WAVE container is structurally invalid or truncated.
struct MalformedWavError : Error {
  using Error::Error;
};

// Container parses but the codec/layout is outside PCM16 / float32, 1-2 ch.
struct UnsupportedWavError : Error {
  using Error::Error;
};

// Data chunk holds zero samples.
struct EmptyWavError : Error {
  using Error::Error;
};

// Every analysis frame of the clip sits below the silence gate.
struct AllSilentError : Error {
  using Error::Error;
};

// Input shorter than one analysis window.
struct TooShortError : Error {
  using Error::Error;
};

// Tensor shapes incompatible with the requested operation.
struct ShapeError : Error {
  using Error::Error;
};

// Invalid configuration: bad frequency bounds, m >= n filter shape,
// non-positive derived layer size, and similar construction-time problems.
struct ConfigError : Error {
  using Error::Error;
};

// Out-of-range or otherwise invalid runtime value (label index, class id...).
struct ValueError : Error {
  using Error::Error;
};

// Manifest CSV problems: bad header, unknown mode, duplicate path.
struct ManifestError : Error {
  using Error::Error;
};

// File I/O problems.
struct IoError : Error {
  using Error::Error;
};

struct CorruptFileError : IoError {
  using IoError::IoError;
};

struct VersionMismatchError : IoError {
  using IoError::IoError;
};

}  // namespace phonation
