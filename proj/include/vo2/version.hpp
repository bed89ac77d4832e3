#pragma once

namespace vo2 {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace vo2
