#pragma once

#include <stdexcept>
#include <string>

namespace speechmesh {

// Precondition/contract failure. Callers that violate an operation's
// documented preconditions get this with a human-readable diagnostic.
class contract_error : public std::runtime_error {
 public:
  explicit contract_error(const std::string& msg) : std::runtime_error(msg) {}
};

// I/O failure (missing file, bad magic, truncated payload, ...).
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw contract_error(msg);
}

inline void check_io(bool cond, const std::string& msg) {
  if (!cond) throw io_error(msg);
}

}  // namespace speechmesh
