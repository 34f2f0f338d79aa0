#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssbc/types.hpp"

namespace ssbc {

/// One last-token hidden state at one layer.
struct HiddenStateRecord {
  std::string record_id;
  std::string group_id;
  std::uint16_t layer = 0;
  std::optional<DistressLevel> label;
  std::vector<float> vector;

  friend bool operator==(const HiddenStateRecord&, const HiddenStateRecord&) = default;
};

class HsdFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kHsdVersion = 1;

/// Layout (all integers little-endian):
///   "HSDF" | u32 version | records...
///   record: u16 len + record_id | u16 len + group_id | u16 layer |
///           u8 label (0,1,2; 255 unlabeled) | u32 dim | dim x f32
std::string encode_hsd(std::span<const HiddenStateRecord> records);
std::vector<HiddenStateRecord> decode_hsd(std::string_view bytes);

void write_hsd(const std::filesystem::path& path, std::span<const HiddenStateRecord> records);
std::vector<HiddenStateRecord> read_hsd(const std::filesystem::path& path);

}  // namespace ssbc
