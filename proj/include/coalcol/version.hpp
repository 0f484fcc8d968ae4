#pragma once

namespace coalcol {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace coalcol
