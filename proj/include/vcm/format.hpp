#pragma once

#include <charconv>
#include <string>

namespace vcm {

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

/// Writes `contents` to a temporary file beside `path`, then renames it over
/// `path`. Throws Error on I/O failure.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace vcm
