#pragma once

namespace rodd {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rodd
