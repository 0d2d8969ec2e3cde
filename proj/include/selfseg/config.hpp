#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace selfseg {

// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
// Duplicate keys are a config error.
std::map<std::string, std::string> parse_key_values(const std::string& text);
std::map<std::string, std::string> load_key_values(const std::filesystem::path& path);

int parse_int(const std::string& key, const std::string& value);
std::uint64_t parse_u64(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);

}  // namespace selfseg
