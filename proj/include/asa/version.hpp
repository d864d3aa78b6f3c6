#pragma once

namespace asa {

inline constexpr const char* kVersion = "0.1.0";

// Checkpoint / log format revision. Bump when serialized layouts change.
inline constexpr unsigned kFormatVersion = 1;

}  // namespace asa
