#pragma once

namespace mogphmm {

inline constexpr const char* kVersion = "0.1.0";

} // namespace mogphmm
