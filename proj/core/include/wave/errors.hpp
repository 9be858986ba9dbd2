#pragma once

#include <stdexcept>
#include <string>

namespace wave {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes that do not agree for an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Speech/audio streams of a sample are not frame-synchronised.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

// Encoded sequence longer than the model's max_seq_len.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class EmptyBatchError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// Raised by training when the loss stops being finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace wave
