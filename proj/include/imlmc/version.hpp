#pragma once

namespace imlmc {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace imlmc
