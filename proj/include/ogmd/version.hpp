#pragma once

namespace ogmd {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ogmd
