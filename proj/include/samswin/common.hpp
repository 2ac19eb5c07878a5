#pragma once

#include <stdexcept>
#include <string>

namespace samswin {

// All recoverable failures surface as Error; the C API maps them to status codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

constexpr const char* kVersion = "0.1.0";

}  // namespace samswin
