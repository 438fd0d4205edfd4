#pragma once

namespace stbd {
inline constexpr const char* kVersion = "0.1.0";
}
