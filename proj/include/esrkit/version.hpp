#pragma once

namespace esr {

inline constexpr const char* kVersion = "0.1.0";

}
