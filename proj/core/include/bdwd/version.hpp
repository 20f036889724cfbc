#pragma once

namespace bdwd {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace bdwd
