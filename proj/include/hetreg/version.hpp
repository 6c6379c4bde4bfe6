#pragma once

namespace hetreg {

inline constexpr const char* version = "0.1.0";

}  // namespace hetreg
