#pragma once

#include <stdexcept>
#include <string>

namespace georef {

/// Rejected input or unrecoverable processing failure. The message is a single line.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace georef
