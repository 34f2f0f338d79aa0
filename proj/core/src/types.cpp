#include "ssbc/types.hpp"

#include <algorithm>
#include <cctype>

namespace ssbc {

namespace {
std::string lower(std::string_view text) {
  std::string out(text);
  std::ranges::transform(out, out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}
}  // namespace

std::string_view to_string(DistressLevel level) {
  switch (level) {
    case DistressLevel::none:
      return "none";
    case DistressLevel::mild:
      return "mild";
    case DistressLevel::moderate_plus:
      return "moderate+";
  }
  return "none";
}

std::optional<DistressLevel> parse_distress_level(std::string_view text) {
  const auto s = lower(text);
  if (s == "none") return DistressLevel::none;
  if (s == "mild") return DistressLevel::mild;
  if (s == "moderate+" || s == "moderate_plus") return DistressLevel::moderate_plus;
  return std::nullopt;
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system:
      return "system";
    case Role::user:
      return "user";
    case Role::assistant:
      return "assistant";
  }
  return "user";
}

std::optional<Role> parse_role(std::string_view text) {
  if (text == "system") return Role::system;
  if (text == "user") return Role::user;
  if (text == "assistant") return Role::assistant;
  return std::nullopt;
}

}  // namespace ssbc
