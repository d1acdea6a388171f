#pragma once

namespace propdiag {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace propdiag
