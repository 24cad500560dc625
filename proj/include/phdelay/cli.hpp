#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace phdelay {

inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes: 0 success, 1 analysis did not certify, 2 usage or input error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

}  // namespace phdelay
