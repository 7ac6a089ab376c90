#pragma once

namespace pf {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace pf
