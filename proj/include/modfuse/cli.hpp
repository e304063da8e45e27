#pragma once
// Command-line front end. `run` takes the arguments after the program name
// and writes data to `out`, diagnostics to `err`; it returns the exit code
// (0 success, 1 runtime failure, 2 usage error).

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace modfuse::cli {

inline constexpr std::string_view kToolName = "modfuse";
inline constexpr std::string_view kToolVersion = "0.1.0";

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

} // namespace modfuse::cli
