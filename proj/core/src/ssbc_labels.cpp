#include "ssbc/ssbc_labels.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <map>

#include "ssbc/types.hpp"

namespace ssbc {

SupportCategory category_of(SsbcLabel label) {
  switch (label) {
    case SsbcLabel::sympathy:
    case SsbcLabel::empathy:
    case SsbcLabel::encouragement:
      return SupportCategory::emotional;
    case SsbcLabel::advice:
    case SsbcLabel::referral:
    case SsbcLabel::situational_appraisal:
    case SsbcLabel::teaching:
      return SupportCategory::informational;
    case SsbcLabel::compliment:
    case SsbcLabel::validation:
    case SsbcLabel::relief_of_blame:
      return SupportCategory::esteem;
    case SsbcLabel::companions:
    case SsbcLabel::presence:
      return SupportCategory::network;
  }
  return SupportCategory::emotional;
}

std::string_view to_string(SsbcLabel label) {
  static constexpr std::array<std::string_view, kLabelCount> kNames{
      "sympathy", "empathy",    "encouragement", "advice",          "referral",   "situational_appraisal",
      "teaching", "compliment", "validation",    "relief_of_blame", "companions", "presence"};
  return kNames[static_cast<std::size_t>(label)];
}

std::string_view to_string(SupportCategory category) {
  switch (category) {
    case SupportCategory::emotional:
      return "Emotional";
    case SupportCategory::informational:
      return "Informational";
    case SupportCategory::esteem:
      return "Esteem";
    case SupportCategory::network:
      return "Network";
  }
  return "Emotional";
}

std::string_view short_name(SupportCategory category) {
  switch (category) {
    case SupportCategory::emotional:
      return "Emo";
    case SupportCategory::informational:
      return "Info";
    case SupportCategory::esteem:
      return "Est";
    case SupportCategory::network:
      return "Net";
  }
  return "Emo";
}

std::optional<SsbcLabel> parse_label(std::string_view text) {
  std::string key;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      key.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == ' ' || c == '-' || c == '_' || c == '/') {
      if (!key.empty() && key.back() != '_') key.push_back('_');
    }
    // punctuation such as '.', quotes and asterisks is dropped
  }
  while (!key.empty() && key.back() == '_') key.pop_back();

  static const std::map<std::string, SsbcLabel, std::less<>> kAliases{
      {"sit_appraisal", SsbcLabel::situational_appraisal},
      {"situation_appraisal", SsbcLabel::situational_appraisal},
      {"appraisal", SsbcLabel::situational_appraisal},
      {"relief", SsbcLabel::relief_of_blame},
      {"relief_from_blame", SsbcLabel::relief_of_blame},
      {"blame_relief", SsbcLabel::relief_of_blame},
      {"companion", SsbcLabel::companions},
      {"compliments", SsbcLabel::compliment},
      {"referrals", SsbcLabel::referral},
  };
  for (auto label : kAllLabels) {
    if (key == to_string(label)) return label;
  }
  if (auto it = kAliases.find(key); it != kAliases.end()) return it->second;
  return std::nullopt;
}

int mask_size(LabelMask mask) { return std::popcount(mask); }

LabelSet::LabelSet(std::initializer_list<SsbcLabel> labels) {
  for (auto l : labels) {
    if (!contains(l) && !insert(l)) throw PreconditionError("a label set holds at most three labels");
  }
}

LabelSet LabelSet::from_mask(LabelMask mask) {
  if (mask_size(mask) > kMaxSize) throw PreconditionError("a label set holds at most three labels");
  if (mask >> kLabelCount) throw PreconditionError("label mask has unknown bits");
  LabelSet s;
  s.mask_ = mask;
  return s;
}

bool LabelSet::insert(SsbcLabel label) {
  if (contains(label)) return true;
  if (size() >= kMaxSize) return false;
  mask_ |= bit(label);
  return true;
}

std::vector<SsbcLabel> LabelSet::labels() const {
  std::vector<SsbcLabel> out;
  for (auto l : kAllLabels) {
    if (contains(l)) out.push_back(l);
  }
  return out;
}

json to_json(const LabelSet& set) {
  json arr = json::array();
  for (auto l : set.labels()) arr.push_back(to_string(l));
  return arr;
}

LabelSet label_set_from_json(const json& array) {
  LabelSet s;
  for (const auto& e : array) {
    auto l = parse_label(e.get<std::string>());
    if (!l) throw ParseError("unknown SSBC label '" + e.get<std::string>() + "'");
    if (!s.insert(*l)) throw ParseError("label set exceeds three labels");
  }
  return s;
}

}  // namespace ssbc
