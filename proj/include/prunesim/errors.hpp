#pragma once

#include <stdexcept>

namespace prunesim {

// Bad configuration (invalid dimensions, unknown keys, missing files).
// The CLI maps this to exit code 1; other runtime failures map to 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace prunesim
