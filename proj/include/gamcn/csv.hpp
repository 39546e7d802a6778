#pragma once

// Minimal comma-separated reader/writer helpers. No quoting: every file the
// project reads or writes is numeric apart from ISO timestamps.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace gamcn {

class CsvReader {
public:
    explicit CsvReader(const std::filesystem::path& path);

    const std::vector<std::string>& header() const { return header_; }
    /// Next non-empty data row; false at end of file.
    bool next(std::vector<std::string>& fields);
    /// 1-based line number of the row last returned.
    std::size_t line() const { return line_; }
    /// "file:line" for error messages.
    std::string where() const;

private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::vector<std::string> header_;
    std::size_t line_ = 0;
};

std::vector<std::string> split_fields(std::string_view line, char sep = ',');

double parse_double(std::string_view text, const CsvReader& context);
std::size_t parse_index(std::string_view text, const CsvReader& context);

/// Shortest representation that parses back to the identical double.
std::string format_double(double value);

}  // namespace gamcn
