#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace instfmt {

using json = nlohmann::json;

/// Read a JSON-Lines file. Blank lines are skipped; a malformed line raises
/// ValidationError carrying the 1-based line number.
std::vector<json> read_jsonl(const std::filesystem::path& path);

/// Parse JSON-Lines from an in-memory buffer.
std::vector<json> parse_jsonl(const std::string& text, const std::string& origin = "<memory>");

/// Write records one per line, compact, trailing newline after each.
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records);

std::string dump_jsonl(const std::vector<json>& records);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace instfmt
