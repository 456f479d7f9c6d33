#pragma once

// Small text helpers shared by the file formats: shortest round-trip number
// rendering, strict parsing and field splitting.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace egat::text {

// Shortest decimal that parses back to exactly the same double.
std::string format_double(double value);

std::optional<double> parse_double(std::string_view s);
std::optional<std::int64_t> parse_int(std::string_view s);
std::optional<std::size_t> parse_size(std::string_view s);

std::string_view trim(std::string_view s);
// Splits on a single delimiter character; empty fields are kept.
std::vector<std::string_view> split(std::string_view s, char delim);
// Splits on runs of spaces and tabs.
std::vector<std::string_view> split_ws(std::string_view s);

// One CSV record: comma separated, double-quoted fields may contain commas
// and doubled quotes. Returns nullopt on an unterminated quote.
std::optional<std::vector<std::string>> split_csv(std::string_view line);
// Quotes a field when it contains a comma, quote or leading/trailing space.
std::string csv_field(std::string_view s);
std::string to_lower(std::string_view s);

// `key = value` lines in file order. '#' starts a comment, blank lines are
// skipped. Throws ConfigError naming `source` and the line on a malformed or
// repeated key.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text, std::string_view source);

}  // namespace egat::text
