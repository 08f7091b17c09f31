#pragma once

namespace vtok {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace vtok
