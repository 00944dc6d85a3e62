#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pseudolat {

// Shortest decimal that parses back to the same double ("nan"/"inf" for non-finite values).
std::string format_double(double v);

void write_text_file(const std::filesystem::path& path, std::string_view contents);
std::string read_text_file(const std::filesystem::path& path);

// Reads a comma-separated file with no quoting. The first line must equal `expected_header`.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path, std::string_view expected_header);

double parse_double(std::string_view field, const std::filesystem::path& source);
long long parse_int(std::string_view field, const std::filesystem::path& source);

}  // namespace pseudolat
