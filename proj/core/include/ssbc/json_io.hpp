#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace ssbc {

using json = nlohmann::json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes `bytes` to a sibling temp file and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

/// Canonical single-line serialization: sorted keys, no whitespace.
std::string canonical_dump(const json& value);

std::string to_jsonl(const std::vector<json>& records);
std::vector<json> parse_jsonl(std::string_view text);
std::vector<json> read_jsonl(const std::filesystem::path& path);

}  // namespace ssbc
