#pragma once

#include <stdexcept>
#include <string>

namespace deid {

// Single exception type for every recoverable failure in the toolkit.
// The CLI maps it onto a nonzero exit code and an "error:" prefixed line.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace deid
