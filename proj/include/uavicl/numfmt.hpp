#pragma once

#include <optional>
#include <string>

namespace uavicl {

// Shortest decimal string that parses back to the same double.
std::string format_double(double v);
std::string format_optional(const std::optional<double>& v);

// FNV-1a, hex encoded; used for config hashes.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace uavicl
