#pragma once

namespace amhfit {

inline constexpr const char* version = "0.1.0";

} // namespace amhfit
