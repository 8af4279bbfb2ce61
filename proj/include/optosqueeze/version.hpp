#pragma once

namespace optosqueeze {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace optosqueeze
