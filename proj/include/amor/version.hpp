#pragma once

namespace amor {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace amor
