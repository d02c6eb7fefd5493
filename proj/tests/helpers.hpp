#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "pihnn/complexcore.hpp"

namespace testing {

inline double rel_err(pihnn::C64 got, pihnn::C64 want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

inline std::string source_path(const std::string& rel) { return std::string(PIHNN_SOURCE_DIR) + "/" + rel; }

}  // namespace testing
