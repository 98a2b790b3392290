#pragma once

namespace recalib {

inline constexpr const char* version = "0.1.0";
inline constexpr int report_schema_version = 1;

}  // namespace recalib
