#pragma once

// key=value text with '#' comments, used by config files and dataset manifests.

#include <istream>
#include <string>
#include <utility>
#include <vector>

namespace gamcn {

struct KeyValue {
    std::string key;
    std::string value;
    std::size_t line = 0;
};

/// Throws ConfigError (naming `source` and the line) on a line without '='
/// or a repeated key.
std::vector<KeyValue> parse_key_values(std::istream& in, const std::string& source);

/// Trims ASCII whitespace from both ends.
std::string trim(const std::string& s);

/// Splits on `sep` and trims each piece; empty pieces are dropped.
std::vector<std::string> split_list(const std::string& s, char sep = ',');

}  // namespace gamcn
