#pragma once

namespace nldholo {

inline constexpr const char* version = "0.1.0";
inline constexpr int manifest_format_version = 1;

} // namespace nldholo
