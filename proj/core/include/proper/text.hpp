#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

// Small string, hashing and file helpers shared by every module.
namespace proper::text {

std::string_view trim(std::string_view s);
std::string_view trim_newlines(std::string_view s);
bool is_blank(std::string_view s);
std::string to_lower(std::string_view s);

// Lowercased maximal runs of ASCII alphanumerics.
std::vector<std::string> alnum_tokens(std::string_view s);

// Whitespace-separated words.
std::vector<std::string_view> words(std::string_view s);

std::uint64_t fnv1a64(std::string_view s, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);
std::string sha256_hex(std::string_view data);

// Shortest round-trip decimal that always carries a fractional part:
// 8 -> "8.0", 0.5 -> "0.5".
std::string format_real(double v);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`.
void atomic_write_file(const std::filesystem::path& path, std::string_view contents);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace proper::text
