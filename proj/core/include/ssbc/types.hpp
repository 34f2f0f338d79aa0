#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ssbc {

/// Ordinal distress scale shared by human labels, teacher labels and probe output.
enum class DistressLevel : std::uint8_t { none = 0, mild = 1, moderate_plus = 2 };

inline constexpr std::array<DistressLevel, 3> kDistressLevels{
    DistressLevel::none, DistressLevel::mild, DistressLevel::moderate_plus};

std::string_view to_string(DistressLevel level);

/// Accepts "none", "mild", "moderate+" (and "moderate_plus"), case-insensitively.
std::optional<DistressLevel> parse_distress_level(std::string_view text);

inline int ordinal(DistressLevel level) { return static_cast<int>(level); }

enum class Role : std::uint8_t { system, user, assistant };

std::string_view to_string(Role role);
std::optional<Role> parse_role(std::string_view text);

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

/// Raised when a documented precondition of an operation does not hold.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed text returned by a model or found in an input file.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ssbc
