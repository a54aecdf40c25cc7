#pragma once

#include <stdexcept>
#include <string>

namespace softgrove {

// Malformed tree: an internal node missing one child, a distributed node
// without right-gate weights, and so on.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An operation was called on a tree in the wrong state (e.g. active_leaves on
// a tree that has not been hardened).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Problems with input data: unparseable CSV cells, dimension mismatches.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training diverged (non-finite loss).
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int epoch)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace softgrove
