#pragma once

namespace smm {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace smm
