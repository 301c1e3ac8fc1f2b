#pragma once

namespace dbl {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dbl
