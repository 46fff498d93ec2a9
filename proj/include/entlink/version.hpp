#pragma once

namespace entlink {

inline constexpr const char* kVersion = "0.1.0";

} // namespace entlink
