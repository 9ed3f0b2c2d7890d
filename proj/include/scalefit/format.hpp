#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace scalefit {

// Shortest decimal string that round-trips to the same double.
std::string format_shortest(double value);

// Decimal with 17 significant digits (canonical CSV emission).
std::string format_g17(double value);

// Parses a real in decimal or power notation ("2^-9.5", "2^20").
// Returns false on any trailing garbage or empty input.
bool parse_real(std::string_view text, double& out);

// Parses an integer in decimal or exact power-of-two notation ("2^20").
bool parse_integer(std::string_view text, std::int64_t& out);

// FNV-1a 64-bit digest rendered as "fnv1a64:<16 hex digits>".
std::string content_digest(std::string_view bytes);

}  // namespace scalefit
