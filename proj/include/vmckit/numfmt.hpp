#pragma once

#include <string>
#include <string_view>

namespace vmckit {

/// Shortest decimal that round-trips to the same double. Used for every
/// number written to traces and checkpoints so output bytes are reproducible.
std::string format_double(double v);

/// Strict parse: the whole string must be a number. Throws ConfigError.
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

std::string_view trim(std::string_view s);

}  // namespace vmckit
