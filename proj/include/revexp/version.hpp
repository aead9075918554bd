#pragma once

namespace revexp {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace revexp
