#pragma once

#include <array>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

#include "aftermath/errors.hpp"

namespace aftermath::taxonomy {

struct NoCategoryFound : Error {
  using Error::Error;
};
struct NoMmiFound : Error {
  using Error::Error;
};
struct InvalidRoman : Error {
  using Error::Error;
};

/// Responder concern associated with each damage category, bijective with it.
enum class ConcernLevel : int { Least = 1, Moderate = 2, High = 3, Severe = 4 };

std::string_view concern_name(ConcernLevel c);   // "Least" ... "Severe"
std::string concern_phrase(ConcernLevel c);      // "Least Concern" ...
ConcernLevel concern_for_level(int level);

/// The four-level ordinal damage scale. Only levels 1..4 construct.
class DamageCategory {
 public:
  static DamageCategory from_level(int level);
  /// Accepts the canonical snake_case string used in report files.
  static std::optional<DamageCategory> from_canonical(std::string_view s);
  static std::array<DamageCategory, 4> all();

  int level() const { return level_; }
  std::string_view name() const;          // "NoSlightDamage" ...
  std::string_view display_name() const;  // "No/Slight Damage" ...
  std::string_view canonical() const;     // "no_slight_damage" ...
  ConcernLevel concern() const { return concern_for_level(level_); }
  /// "Major Damage - High Concern" style, parseable by parse_category.
  std::string display_string() const;

  auto operator<=>(const DamageCategory&) const = default;

 private:
  explicit DamageCategory(int level) : level_(level) {}
  int level_;
};

inline const DamageCategory kNoSlightDamage = DamageCategory::from_level(1);
inline const DamageCategory kModerateDamage = DamageCategory::from_level(2);
inline const DamageCategory kMajorDamage = DamageCategory::from_level(3);
inline const DamageCategory kTotallyDestroyed = DamageCategory::from_level(4);

/// Modified Mercalli Intensity rank, I..XII. Labels are display-only.
class MmiRank {
 public:
  static MmiRank from_value(int value);               // throws on value outside [1,12]
  static MmiRank from_roman(std::string_view roman);  // throws InvalidRoman

  int value() const { return value_; }
  std::string_view roman() const;
  std::string_view label() const;  // "Severe", "Extreme", ...
  std::string display() const;     // "MMI-XI (Extreme)"

  auto operator<=>(const MmiRank&) const = default;

 private:
  explicit MmiRank(int value) : value_(value) {}
  int value_;
};

/// Ground-truth vocabulary of xBD label files.
enum class XbdLabel { NoDamage, MinorDamage, MajorDamage, Destroyed, Unclassified };

std::string_view xbd_label_name(XbdLabel l);  // "no-damage" ...
/// Case-insensitive after trimming; only the five known strings parse.
std::optional<XbdLabel> parse_xbd_label(std::string_view s);

/// The order-preserving map from xBD labels onto the four categories.
/// un-classified has no category and returns nullopt (excluded from metrics).
std::optional<DamageCategory> map_xbd_to_category(XbdLabel label);

/// Finds the first category name or concern phrase mentioned in free text
/// (case-insensitive, word-boundary matched). First mention wins.
DamageCategory parse_category(std::string_view text);  // throws NoCategoryFound

/// Extracts the first "MMI-<roman>" or "MMI <roman>" token and returns its
/// rank. A well-formed token with a numeral outside I..XII is InvalidRoman.
MmiRank parse_mmi(std::string_view text);  // throws NoMmiFound, InvalidRoman

}  // namespace aftermath::taxonomy
