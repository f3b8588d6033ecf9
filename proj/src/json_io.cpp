#include "dagsched/json_io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "dagsched/errors.hpp"

namespace dagsched {

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
}

void save_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out << j.dump() << '\n';
  if (!out) throw IoError("write failed: " + path);
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf;
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

namespace {
constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}
}  // namespace

std::string base64_encode(const std::uint8_t* data, size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (size_t i = 0; i < len; i += 3) {
    std::uint32_t chunk = static_cast<std::uint32_t>(data[i]) << 16;
    if (i + 1 < len) chunk |= static_cast<std::uint32_t>(data[i + 1]) << 8;
    if (i + 2 < len) chunk |= data[i + 2];
    out.push_back(kB64Alphabet[(chunk >> 18) & 63]);
    out.push_back(kB64Alphabet[(chunk >> 12) & 63]);
    out.push_back(i + 1 < len ? kB64Alphabet[(chunk >> 6) & 63] : '=');
    out.push_back(i + 2 < len ? kB64Alphabet[chunk & 63] : '=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw IoError("base64: length must be multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (size_t i = 0; i < text.size(); i += 4) {
    int vals[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && k >= 2 && i + 4 == text.size()) {
        vals[k] = 0;
        ++pad;
      } else {
        vals[k] = b64_value(c);
        if (vals[k] < 0 || pad > 0) throw IoError("base64: invalid character");
      }
    }
    const std::uint32_t chunk = (static_cast<std::uint32_t>(vals[0]) << 18) |
                                (static_cast<std::uint32_t>(vals[1]) << 12) |
                                (static_cast<std::uint32_t>(vals[2]) << 6) |
                                static_cast<std::uint32_t>(vals[3]);
    out.push_back(static_cast<std::uint8_t>((chunk >> 16) & 0xff));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((chunk >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(chunk & 0xff));
  }
  return out;
}

}  // namespace dagsched
