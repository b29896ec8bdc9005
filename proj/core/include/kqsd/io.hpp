#pragma once

#include <string>

namespace kqsd {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
void ensure_directory(const std::string& path);
std::string join_path(const std::string& dir, const std::string& name);

// Shortest exact decimal form of a double ("%.17g" trimmed via round-trip).
std::string fmt_double(double v);

}  // namespace kqsd
