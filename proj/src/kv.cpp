#include "gamcn/kv.hpp"

#include <set>

#include "gamcn/errors.hpp"

namespace gamcn {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t begin = 0;
    while (begin <= s.size()) {
        auto end = s.find(sep, begin);
        if (end == std::string::npos) end = s.size();
        auto piece = trim(s.substr(begin, end - begin));
        if (!piece.empty()) out.push_back(std::move(piece));
        begin = end + 1;
    }
    return out;
}

std::vector<KeyValue> parse_key_values(std::istream& in, const std::string& source) {
    std::vector<KeyValue> out;
    std::set<std::string> seen;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const auto text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(source + ":" + std::to_string(line) + ": expected key=value, got '" + text + "'");
        }
        KeyValue kv{trim(text.substr(0, eq)), trim(text.substr(eq + 1)), line};
        if (kv.key.empty()) throw ConfigError(source + ":" + std::to_string(line) + ": empty key");
        if (!seen.insert(kv.key).second) {
            throw ConfigError(source + ":" + std::to_string(line) + ": duplicate key '" + kv.key + "'");
        }
        out.push_back(std::move(kv));
    }
    return out;
}

}  // namespace gamcn
