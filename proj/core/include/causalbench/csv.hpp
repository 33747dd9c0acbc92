#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace causalbench::csv {

// Shortest round-trip representation (to_chars); parses back bit-identical.
std::string format_double(double v);
double parse_double(std::string_view s);

// Quotes a field only when it contains a comma, quote, or newline.
std::string quote(std::string_view field);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Minimal RFC-4180-ish reader: handles quoted fields with "" escapes and
// skips blank lines and lines starting with '#'. Throws IngestionError on
// unreadable files.
Table read_file(const std::filesystem::path& path);

void write_file(const std::filesystem::path& path, const Table& table);

std::string join_row(const std::vector<std::string>& fields);

}  // namespace causalbench::csv
