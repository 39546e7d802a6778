#include "gamcn/csv.hpp"

#include <charconv>
#include <cmath>

#include "gamcn/errors.hpp"

namespace gamcn {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

std::vector<std::string> split_fields(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

CsvReader::CsvReader(const std::filesystem::path& path) : path_(path), in_(path) {
    if (!in_) throw LoadError("cannot open " + path.string());
    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        if (trim(line).empty()) continue;
        header_ = split_fields(line);
        return;
    }
    throw LoadError(path.string() + ": empty file");
}

bool CsvReader::next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        if (trim(line).empty()) continue;
        fields = split_fields(line);
        return true;
    }
    return false;
}

std::string CsvReader::where() const { return path_.string() + ":" + std::to_string(line_); }

double parse_double(std::string_view text, const CsvReader& context) {
    double value = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw LoadError(context.where() + ": cannot parse number '" + std::string(text) + "'");
    }
    if (!std::isfinite(value)) throw LoadError(context.where() + ": non-finite value '" + std::string(text) + "'");
    return value;
}

std::size_t parse_index(std::string_view text, const CsvReader& context) {
    std::size_t value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw LoadError(context.where() + ": cannot parse index '" + std::string(text) + "'");
    }
    return value;
}

std::string format_double(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

}  // namespace gamcn
