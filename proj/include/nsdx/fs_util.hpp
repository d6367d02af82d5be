#pragma once

#include <string>
#include <string_view>

namespace nsdx {

// Writes to a sibling temp file then renames it over `path`, so readers
// never observe a half-written file. Creates parent directories.
void write_file_atomic(const std::string& path, std::string_view contents);

std::string read_file(const std::string& path);

}  // namespace nsdx
