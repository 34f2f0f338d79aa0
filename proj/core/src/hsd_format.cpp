#include "ssbc/hsd_format.hpp"

#include <bit>
#include <cmath>
#include <map>

#include "ssbc/json_io.hpp"

namespace ssbc {

namespace {

constexpr std::string_view kMagic = "HSDF";
constexpr std::uint8_t kUnlabeled = 255;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_string(std::string& out, const std::string& s) {
  if (s.size() > 0xFFFF) throw HsdFormatError("HSD string field longer than 65535 bytes");
  put_u16(out, static_cast<std::uint16_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::string_view take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw HsdFormatError("HSD file truncated");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint16_t u16() {
    auto s = take(2);
    return static_cast<std::uint16_t>(static_cast<std::uint8_t>(s[0]) | (static_cast<std::uint8_t>(s[1]) << 8));
  }
  std::uint32_t u32() {
    auto s = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(s[i])) << (8 * i);
    return v;
  }
  std::string str() {
    const auto n = u16();
    return std::string(take(n));
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void check_dims(std::map<std::uint16_t, std::size_t>& dims, const HiddenStateRecord& r) {
  auto [it, inserted] = dims.emplace(r.layer, r.vector.size());
  if (!inserted && it->second != r.vector.size()) {
    throw HsdFormatError("mixed vector dimensions for layer " + std::to_string(r.layer));
  }
}

}  // namespace

std::string encode_hsd(std::span<const HiddenStateRecord> records) {
  std::string out(kMagic);
  put_u32(out, kHsdVersion);
  std::map<std::uint16_t, std::size_t> dims;
  for (const auto& r : records) {
    check_dims(dims, r);
    put_string(out, r.record_id);
    put_string(out, r.group_id);
    put_u16(out, r.layer);
    out.push_back(static_cast<char>(r.label ? static_cast<std::uint8_t>(*r.label) : kUnlabeled));
    put_u32(out, static_cast<std::uint32_t>(r.vector.size()));
    for (float f : r.vector) {
      if (!std::isfinite(f)) throw HsdFormatError("non-finite value in record " + r.record_id);
      put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
  }
  return out;
}

std::vector<HiddenStateRecord> decode_hsd(std::string_view bytes) {
  Reader in(bytes);
  if (bytes.size() < 8 || in.take(4) != kMagic) throw HsdFormatError("not an HSD file (bad magic)");
  if (const auto version = in.u32(); version != kHsdVersion) {
    throw HsdFormatError("unsupported HSD version " + std::to_string(version));
  }
  std::vector<HiddenStateRecord> records;
  std::map<std::uint16_t, std::size_t> dims;
  while (!in.done()) {
    HiddenStateRecord r;
    r.record_id = in.str();
    r.group_id = in.str();
    r.layer = in.u16();
    const auto label = in.u8();
    if (label <= 2) {
      r.label = static_cast<DistressLevel>(label);
    } else if (label != kUnlabeled) {
      throw HsdFormatError("invalid label byte " + std::to_string(label));
    }
    const auto dim = in.u32();
    const auto payload = in.take(static_cast<std::size_t>(dim) * 4);
    r.vector.resize(dim);
    for (std::uint32_t i = 0; i < dim; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(payload[4 * i + b])) << (8 * b);
      }
      r.vector[i] = std::bit_cast<float>(bits);
      if (!std::isfinite(r.vector[i])) throw HsdFormatError("non-finite value in record " + r.record_id);
    }
    check_dims(dims, r);
    records.push_back(std::move(r));
  }
  return records;
}

void write_hsd(const std::filesystem::path& path, std::span<const HiddenStateRecord> records) {
  atomic_write(path, encode_hsd(records));
}

std::vector<HiddenStateRecord> read_hsd(const std::filesystem::path& path) {
  return decode_hsd(read_file(path));
}

}  // namespace ssbc
