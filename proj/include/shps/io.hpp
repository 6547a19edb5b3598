#pragma once

#include <complex>
#include <ostream>
#include <string>

namespace shps {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

inline void write_double(std::ostream& os, double value) { os << format_double(value); }

}  // namespace shps
