#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace uncerseg {

// Precondition violations on pure operations (bad probability, bad box, size mismatch).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EmptyForeground : public DomainError {
 public:
  EmptyForeground() : DomainError("mask has no foreground pixels") {}
};

class InsufficientForeground : public DomainError {
 public:
  InsufficientForeground(std::size_t wanted, std::size_t available);
};

class GenerationFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when an uncertainty map has no region to refine against.
class EmptyUncertainty : public std::runtime_error {
 public:
  EmptyUncertainty() : std::runtime_error("uncertainty region is empty") {}
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Base for everything a segmenter backend can throw.
class SegmenterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TransportError : public SegmenterError {
 public:
  using SegmenterError::SegmenterError;
};

class ProtocolError : public SegmenterError {
 public:
  using SegmenterError::SegmenterError;
};

class BackendError : public SegmenterError {
 public:
  using SegmenterError::SegmenterError;
};

// Wraps a backend failure with the index of the box whose call failed.
class BoxInferenceError : public SegmenterError {
 public:
  BoxInferenceError(std::size_t box_index, const std::string& what)
      : SegmenterError("box " + std::to_string(box_index) + ": " + what), box_index_(box_index) {}
  std::size_t box_index() const noexcept { return box_index_; }

 private:
  std::size_t box_index_;
};

inline InsufficientForeground::InsufficientForeground(std::size_t wanted, std::size_t available)
    : DomainError("requested " + std::to_string(wanted) + " foreground samples but mask has " +
                  std::to_string(available)) {}

}  // namespace uncerseg
