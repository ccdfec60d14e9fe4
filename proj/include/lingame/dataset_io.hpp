#pragma once

// Flat CSV dataset format shared by behavioral data and sentiment fixtures:
//   study_id,condition_id,label,country,s_zero,s_half,s_all,prosocial_rate,
//   text_keep,text_half,text_all
// Header required, UTF-8, comma separated, "." decimal, empty cell = missing.

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lingame/core.hpp"

namespace lingame {

inline constexpr std::array<std::string_view, 11> kDatasetColumns{
    "study_id", "condition_id", "label",          "country",   "s_zero",   "s_half",
    "s_all",    "prosocial_rate", "text_keep", "text_half", "text_all"};

// RFC 4180 subset: quoted fields with "" escapes, LF or CRLF line ends.
// Throws Error{ParseError} on an unterminated quote.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

std::string csv_escape(std::string_view field);

// Groups rows into studies by study_id in order of first appearance.
// Throws Error{SchemaError} for missing or unknown columns and
// Error{ParseError} (with row and column) for malformed cells, including
// scores outside [1, 7] and rates outside [0, 1].
std::vector<Study> parse_dataset(std::string_view csv_text);
std::vector<Study> ingest(const std::filesystem::path& path);

std::string serialize_dataset(std::span<const Study> dataset);

// FNV-1a 64 over the canonical serialization, as 16 hex digits.
std::string dataset_digest(std::span<const Study> dataset);

// Overrides prosocial_rate from a study_id,condition_id,prosocial_rate CSV.
// Throws Error{ParseError} when a row names an unknown condition.
void merge_rates(std::vector<Study>& dataset, std::string_view rates_csv);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace lingame
