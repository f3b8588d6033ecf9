#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace dagsched {

/// Parses a JSON file; throws IoError with the file name and parse position
/// on failure.
nlohmann::json load_json_file(const std::string& path);

/// Writes JSON with a trailing newline; throws IoError on failure.
void save_json_file(const std::string& path, const nlohmann::json& j);

/// Shortest decimal form that round-trips the exact double (via to_chars).
/// Infinity becomes "inf".
std::string format_double(double v);

std::string base64_encode(const std::uint8_t* data, size_t len);
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace dagsched
