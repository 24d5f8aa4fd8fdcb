#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace aquadem {

// All persisted floats use 17 significant digits so load -> save round-trips
// byte-identically and parsed doubles are bit-exact.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_text_file(const std::filesystem::path& path);

// Writes atomically (tmp file + rename) so partially written artifacts never
// appear under the final name.
void write_text_file(const std::filesystem::path& path,
                     const std::string& content);

std::vector<std::string> split_whitespace(const std::string& line);
std::vector<std::string> split_on(const std::string& line, char delim);

double parse_double(const std::string& token);
long parse_long(const std::string& token);

}  // namespace aquadem
