#pragma once

namespace cgscore {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cgscore
