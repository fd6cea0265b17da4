#include "aftermath/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <vector>

namespace aftermath::taxonomy {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

constexpr std::string_view kCategoryNames[4] = {"NoSlightDamage", "ModerateDamage",
                                                "MajorDamage", "TotallyDestroyed"};
constexpr std::string_view kDisplayNames[4] = {"No/Slight Damage", "Moderate Damage",
                                               "Major Damage", "Totally Destroyed"};
constexpr std::string_view kCanonical[4] = {"no_slight_damage", "moderate_damage",
                                            "major_damage", "totally_destroyed"};
constexpr std::string_view kConcernNames[4] = {"Least", "Moderate", "High", "Severe"};

constexpr std::string_view kRomans[12] = {"I", "II",  "III", "IV", "V",  "VI",
                                          "VII", "VIII", "IX", "X",  "XI", "XII"};
constexpr std::string_view kMmiLabels[12] = {"Not Felt", "Weak",        "Weak",   "Light",
                                             "Moderate", "Strong",      "Very Strong",
                                             "Severe",   "Violent",     "Extreme",
                                             "Extreme",  "Extreme"};

struct Keyword {
  std::string_view text;
  int level;
};

// Category names, concern phrases, canonical strings, plus the xBD wording for
// the two middle classes. Matched case-insensitively at word boundaries; the
// earliest mention wins, longest keyword breaking position ties.
constexpr Keyword kKeywords[] = {
    {"no/slight damage", 1}, {"no slight damage", 1}, {"no_slight_damage", 1},
    {"no damage", 1},        {"slight damage", 1},    {"least concern", 1},
    {"moderate damage", 2},  {"moderate_damage", 2},  {"minor damage", 2},
    {"moderate concern", 2}, {"major damage", 3},     {"major_damage", 3},
    {"high concern", 3},     {"totally destroyed", 4}, {"totally_destroyed", 4},
    {"total destruction", 4}, {"destroyed", 4},        {"severe concern", 4},
};

}  // namespace

std::string_view concern_name(ConcernLevel c) {
  return kConcernNames[static_cast<int>(c) - 1];
}

std::string concern_phrase(ConcernLevel c) {
  return std::string(concern_name(c)) + " Concern";
}

ConcernLevel concern_for_level(int level) {
  if (level < 1 || level > 4) throw Error("concern level out of range");
  return static_cast<ConcernLevel>(level);
}

DamageCategory DamageCategory::from_level(int level) {
  if (level < 1 || level > 4) throw Error("damage category level out of range");
  return DamageCategory(level);
}

std::optional<DamageCategory> DamageCategory::from_canonical(std::string_view s) {
  for (int i = 0; i < 4; ++i) {
    if (s == kCanonical[i]) return DamageCategory(i + 1);
  }
  return std::nullopt;
}

std::array<DamageCategory, 4> DamageCategory::all() {
  return {DamageCategory(1), DamageCategory(2), DamageCategory(3), DamageCategory(4)};
}

std::string_view DamageCategory::name() const { return kCategoryNames[level_ - 1]; }
std::string_view DamageCategory::display_name() const { return kDisplayNames[level_ - 1]; }
std::string_view DamageCategory::canonical() const { return kCanonical[level_ - 1]; }

std::string DamageCategory::display_string() const {
  return std::string(display_name()) + " - " + concern_phrase(concern());
}

MmiRank MmiRank::from_value(int value) {
  if (value < 1 || value > 12) throw Error("MMI value out of range [1,12]");
  return MmiRank(value);
}

MmiRank MmiRank::from_roman(std::string_view roman) {
  std::string up = lower(roman);
  std::transform(up.begin(), up.end(), up.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (int i = 0; i < 12; ++i) {
    if (up == kRomans[i]) return MmiRank(i + 1);
  }
  throw InvalidRoman("not a roman numeral in I..XII: " + std::string(roman));
}

std::string_view MmiRank::roman() const { return kRomans[value_ - 1]; }
std::string_view MmiRank::label() const { return kMmiLabels[value_ - 1]; }

std::string MmiRank::display() const {
  return "MMI-" + std::string(roman()) + " (" + std::string(label()) + ")";
}

std::string_view xbd_label_name(XbdLabel l) {
  switch (l) {
    case XbdLabel::NoDamage: return "no-damage";
    case XbdLabel::MinorDamage: return "minor-damage";
    case XbdLabel::MajorDamage: return "major-damage";
    case XbdLabel::Destroyed: return "destroyed";
    case XbdLabel::Unclassified: return "un-classified";
  }
  return "";
}

std::optional<XbdLabel> parse_xbd_label(std::string_view s) {
  const std::string t = lower(trim(s));
  for (XbdLabel l : {XbdLabel::NoDamage, XbdLabel::MinorDamage, XbdLabel::MajorDamage,
                     XbdLabel::Destroyed, XbdLabel::Unclassified}) {
    if (t == xbd_label_name(l)) return l;
  }
  return std::nullopt;
}

std::optional<DamageCategory> map_xbd_to_category(XbdLabel label) {
  switch (label) {
    case XbdLabel::NoDamage: return DamageCategory::from_level(1);
    case XbdLabel::MinorDamage: return DamageCategory::from_level(2);
    case XbdLabel::MajorDamage: return DamageCategory::from_level(3);
    case XbdLabel::Destroyed: return DamageCategory::from_level(4);
    case XbdLabel::Unclassified: return std::nullopt;
  }
  return std::nullopt;
}

DamageCategory parse_category(std::string_view text) {
  const std::string hay = lower(text);
  std::size_t best_pos = std::string::npos;
  std::size_t best_len = 0;
  int best_level = 0;

  for (const Keyword& kw : kKeywords) {
    std::size_t pos = 0;
    while ((pos = hay.find(kw.text, pos)) != std::string::npos) {
      const bool left_ok = pos == 0 || !is_word_char(hay[pos - 1]);
      const std::size_t end = pos + kw.text.size();
      const bool right_ok = end >= hay.size() || !is_word_char(hay[end]);
      if (left_ok && right_ok) {
        if (pos < best_pos || (pos == best_pos && kw.text.size() > best_len)) {
          best_pos = pos;
          best_len = kw.text.size();
          best_level = kw.level;
        }
        break;
      }
      ++pos;
    }
  }

  if (best_level == 0) {
    throw NoCategoryFound("no damage category keyword in text");
  }
  return DamageCategory::from_level(best_level);
}

MmiRank parse_mmi(std::string_view text) {
  const std::string hay = lower(text);
  std::size_t pos = 0;
  while ((pos = hay.find("mmi", pos)) != std::string::npos) {
    const bool left_ok = pos == 0 || !is_word_char(hay[pos - 1]);
    std::size_t i = pos + 3;
    if (!left_ok || i >= hay.size() || (hay[i] != '-' && hay[i] != ' ')) {
      ++pos;
      continue;
    }
    ++i;  // past the separator
    std::size_t start = i;
    while (i < hay.size() && std::string_view("ivxlcdm").find(hay[i]) != std::string_view::npos) {
      ++i;
    }
    const bool bounded = i >= hay.size() || !is_word_char(hay[i]);
    if (i == start || !bounded) {
      ++pos;
      continue;
    }
    // A well-formed token with a numeral outside I..XII throws InvalidRoman
    // rather than being skipped.
    return MmiRank::from_roman(text.substr(start, i - start));
  }
  throw NoMmiFound("no MMI-<roman> token in text");
}

}  // namespace aftermath::taxonomy
