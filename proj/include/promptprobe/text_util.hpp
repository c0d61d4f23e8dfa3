#pragma once

// Small string helpers shared by the file-format readers.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace promptprobe::text {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split_whitespace(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
std::string to_lower(std::string_view s);

/// Locale-independent strict parse; nullopt on trailing garbage or overflow.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);

/// Reads a whole file; throws kIo when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Splits on '\n', dropping a single '\r' at line end. A trailing newline does
/// not produce an extra empty line.
std::vector<std::string> lines(std::string_view content);

}  // namespace promptprobe::text
