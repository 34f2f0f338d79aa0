#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ssbc/json_io.hpp"

namespace ssbc {

/// The twelve analysed SSBC labels, in codebook table order. The enum order
/// is the canonical tie-break order everywhere.
enum class SsbcLabel : std::uint8_t {
  sympathy,
  empathy,
  encouragement,
  advice,
  referral,
  situational_appraisal,
  teaching,
  compliment,
  validation,
  relief_of_blame,
  companions,
  presence,
};

inline constexpr std::size_t kLabelCount = 12;

inline constexpr std::array<SsbcLabel, kLabelCount> kAllLabels{
    SsbcLabel::sympathy,   SsbcLabel::empathy,         SsbcLabel::encouragement,
    SsbcLabel::advice,     SsbcLabel::referral,        SsbcLabel::situational_appraisal,
    SsbcLabel::teaching,   SsbcLabel::compliment,      SsbcLabel::validation,
    SsbcLabel::relief_of_blame, SsbcLabel::companions, SsbcLabel::presence};

enum class SupportCategory : std::uint8_t { emotional, informational, esteem, network };

SupportCategory category_of(SsbcLabel label);
std::string_view to_string(SsbcLabel label);
std::string_view to_string(SupportCategory category);
/// Short category tag used in tables: Emo, Info, Est, Net.
std::string_view short_name(SupportCategory category);

/// Lowercases, maps spaces/hyphens to underscores and resolves aliases such
/// as "Sit. Appraisal". Unknown or excluded labels (access, loan, prayer)
/// yield nullopt.
std::optional<SsbcLabel> parse_label(std::string_view text);

/// Set of labels as a 12-bit mask. Size is unconstrained here; LabelSet
/// enforces the three-label cap.
using LabelMask = std::uint16_t;

inline constexpr LabelMask bit(SsbcLabel label) {
  return static_cast<LabelMask>(1u << static_cast<unsigned>(label));
}
int mask_size(LabelMask mask);

/// Up to three distinct SSBC labels.
class LabelSet {
 public:
  static constexpr int kMaxSize = 3;

  LabelSet() = default;
  LabelSet(std::initializer_list<SsbcLabel> labels);
  /// Throws PreconditionError when the mask holds more than three labels.
  static LabelSet from_mask(LabelMask mask);

  /// Adds a label; returns false (set unchanged) when it would exceed 3.
  bool insert(SsbcLabel label);
  bool contains(SsbcLabel label) const { return (mask_ & bit(label)) != 0; }
  int size() const { return mask_size(mask_); }
  bool empty() const { return mask_ == 0; }
  LabelMask mask() const { return mask_; }
  /// Members in canonical order.
  std::vector<SsbcLabel> labels() const;

  friend bool operator==(const LabelSet&, const LabelSet&) = default;

 private:
  LabelMask mask_ = 0;
};

json to_json(const LabelSet& set);
LabelSet label_set_from_json(const json& array);

}  // namespace ssbc
