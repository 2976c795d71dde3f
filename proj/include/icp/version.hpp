#pragma once

namespace icp {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace icp
