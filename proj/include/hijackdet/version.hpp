#pragma once

namespace hijackdet {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace hijackdet
