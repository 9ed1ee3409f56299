#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace oscillattr {

/// Shortest decimal text that round-trips to the same double.
std::string format_number(double value);

/// RFC-4180 field quoting (only when the field needs it).
std::string csv_escape(std::string_view field);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

std::string sha256_hex(std::string_view data);

/// Stable 64-bit FNV-1a, used for seed derivation from experiment tags.
std::uint64_t fnv1a64(std::string_view data);

}  // namespace oscillattr
