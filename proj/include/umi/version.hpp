#pragma once

namespace umi {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace umi
