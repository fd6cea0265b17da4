#include "aftermath/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

namespace aftermath::protocol {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view confidence_name(Confidence c) {
  switch (c) {
    case Confidence::low: return "low";
    case Confidence::medium: return "medium";
    case Confidence::high: return "high";
  }
  return "low";
}

Confidence parse_confidence(std::string_view s) {
  if (s == "medium") return Confidence::medium;
  if (s == "high") return Confidence::high;
  return Confidence::low;  // unknown values read as low, never as a failure
}

StructureAssessment make_assessment(std::string structure_id, taxonomy::DamageCategory category,
                                    std::string rationale, Confidence confidence) {
  StructureAssessment a;
  a.structure_id = std::move(structure_id);
  a.category = category;
  a.concern = category.concern();
  a.rationale = std::move(rationale);
  a.confidence = confidence;
  return a;
}

std::string content_hash(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PromptError("cannot read prompt template: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

PromptSet PromptSet::load(const fs::path& dir) {
  PromptSet p;
  p.baseline = read_text_file(dir / "baseline.txt");
  p.comparison = read_text_file(dir / "comparison.txt");
  p.building_pair = read_text_file(dir / "building_pair.txt");
  p.mmi = read_text_file(dir / "mmi.txt");
  p.version_hash = content_hash(p.baseline + "\x1f" + p.comparison + "\x1f" + p.building_pair +
                                "\x1f" + p.mmi);
  return p;
}

std::string render_template(std::string_view text,
                            const std::map<std::string, std::string>& vars) {
  std::string out(text);
  for (const auto& [key, value] : vars) {
    std::string needle = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = out.find(needle, pos)) != std::string::npos) {
      out.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  return out;
}

std::string category_definitions_text() {
  // Shown to the model; the wording deliberately includes each display name
  // and concern phrase so the keyword fallback can recover them from prose.
  std::ostringstream out;
  out << "1. No/Slight Damage - Least Concern: structure intact; at most cosmetic marks, "
         "roof and walls whole.\n"
      << "2. Moderate Damage - Moderate Concern: clearly visible partial damage such as "
         "missing roof sections, cracked walls, or debris against the structure; it still "
         "stands.\n"
      << "3. Major Damage - High Concern: partial collapse; large parts of the roof or "
         "walls are gone.\n"
      << "4. Totally Destroyed - Severe Concern: collapsed, flattened, or reduced to "
         "rubble.\n";
  return out.str();
}

std::string response_schema_text() {
  return R"({"structures": [{"id": string, "category": integer 1-4, "rationale": string, "confidence": "low"|"medium"|"high"}], "distribution": {"1": fraction, "2": fraction, "3": fraction, "4": fraction}, "mmi": "MMI-<roman numeral>" (optional), "caveats": string})";
}

std::vector<int> evenly_spaced_indices(int n, int k) {
  std::vector<int> out;
  if (n <= 0 || k <= 0) return out;
  if (n <= k) {
    for (int i = 0; i < n; ++i) out.push_back(i);
    return out;
  }
  if (k == 1) return {0};
  for (int i = 0; i < k; ++i) {
    double pos = static_cast<double>(i) * (n - 1) / (k - 1);
    out.push_back(static_cast<int>(std::lround(pos)));
  }
  return out;
}

std::optional<json> extract_json_block(const std::string& text) {
  // Fenced blocks first, then the whole text, then the outermost braces.
  std::size_t pos = 0;
  while ((pos = text.find("```", pos)) != std::string::npos) {
    std::size_t body_start = text.find('\n', pos);
    if (body_start == std::string::npos) break;
    std::size_t fence_end = text.find("```", body_start);
    if (fence_end == std::string::npos) break;
    json parsed =
        json::parse(text.substr(body_start + 1, fence_end - body_start - 1), nullptr, false);
    if (parsed.is_object()) return parsed;
    pos = fence_end + 3;
  }
  json whole = json::parse(text, nullptr, false);
  if (whole.is_object()) return whole;
  std::size_t open = text.find('{');
  std::size_t close = text.rfind('}');
  if (open != std::string::npos && close != std::string::npos && close > open) {
    json inner = json::parse(text.substr(open, close - open + 1), nullptr, false);
    if (inner.is_object()) return inner;
  }
  return std::nullopt;
}

namespace {

std::optional<taxonomy::DamageCategory> category_from_json(const json& value) {
  if (value.is_number_integer() || value.is_number_float()) {
    int level = value.get<int>();
    if (level >= 1 && level <= 4) return taxonomy::DamageCategory::from_level(level);
    return std::nullopt;
  }
  if (value.is_string()) {
    std::string s = value.get<std::string>();
    if (auto c = taxonomy::DamageCategory::from_canonical(s)) return c;
    try {
      return taxonomy::parse_category(s);
    } catch (const taxonomy::NoCategoryFound&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

/// "0.35", "35%", "30% to 40%", "30-40%" and plain numbers all parse; ranges
/// store their midpoint. Values above 1 are percentages.
std::optional<double> fraction_from_json(const json& value) {
  double raw = 0;
  if (value.is_number()) {
    raw = value.get<double>();
  } else if (value.is_string()) {
    static const std::regex number_re("[0-9]*\\.?[0-9]+");
    std::string s = value.get<std::string>();
    std::vector<double> nums;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), number_re);
         it != std::sregex_iterator(); ++it)
      nums.push_back(std::stod(it->str()));
    if (nums.empty()) return std::nullopt;
    raw = nums.size() >= 2 ? (nums[0] + nums[1]) / 2 : nums[0];
    if (s.find('%') != std::string::npos) raw /= 100;
  } else {
    return std::nullopt;
  }
  if (raw > 1) raw /= 100;
  return std::clamp(raw, 0.0, 1.0);
}

std::map<taxonomy::DamageCategory, double> parse_distribution(const json& block) {
  std::map<taxonomy::DamageCategory, double> dist;
  if (!block.contains("distribution") || !block["distribution"].is_object()) return dist;
  for (const auto& [key, value] : block["distribution"].items()) {
    std::optional<taxonomy::DamageCategory> cat;
    if (key.size() == 1 && key[0] >= '1' && key[0] <= '4')
      cat = taxonomy::DamageCategory::from_level(key[0] - '0');
    else
      cat = taxonomy::DamageCategory::from_canonical(key);
    if (!cat) continue;
    if (auto f = fraction_from_json(value)) dist[*cat] = *f;
  }
  double sum = 0;
  for (const auto& [cat, f] : dist) sum += f;
  // exact fixture maps pass through untouched; renormalize only a real drift
  if (!dist.empty() && sum > 0 && std::abs(sum - 1.0) > 1e-9)
    for (auto& [cat, f] : dist) f /= sum;
  return dist;
}

std::vector<std::string> split_segments(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    if (c == '\n' || c == '.') {
      if (!trim(current).empty()) out.push_back(trim(current));
      current.clear();
    } else {
      current += c;
    }
  }
  if (!trim(current).empty()) out.push_back(trim(current));
  return out;
}

/// Keyword-level fallback over prose. Every assessment it produces is
/// low-confidence; segments naming no known structure get synthetic ids.
std::vector<StructureAssessment> fallback_assessments(const std::string& text,
                                                      const std::vector<std::string>& known_ids) {
  std::vector<StructureAssessment> out;
  std::vector<std::string> seen;
  int unmatched = 0;
  for (const std::string& segment : split_segments(text)) {
    std::optional<taxonomy::DamageCategory> cat;
    try {
      cat = taxonomy::parse_category(segment);
    } catch (const taxonomy::NoCategoryFound&) {
      continue;
    }
    std::string lower = to_lower(segment);
    std::string id;
    for (const std::string& known : known_ids) {
      if (lower.find(to_lower(known)) != std::string::npos) {
        id = known;
        break;
      }
    }
    if (id.empty()) id = "unmatched_" + std::to_string(unmatched++);
    if (std::find(seen.begin(), seen.end(), id) != seen.end()) continue;
    seen.push_back(id);
    out.push_back(make_assessment(id, *cat, segment, Confidence::low));
  }
  return out;
}

}  // namespace

SceneAssessment parse_scene_response(const std::string& text, const std::string& scene_id,
                                     const std::vector<std::string>& known_ids) {
  SceneAssessment scene;
  scene.scene_id = scene_id;

  std::optional<json> block = extract_json_block(text);
  if (block) {
    if (block->contains("structures") && (*block)["structures"].is_array()) {
      for (const json& entry : (*block)["structures"]) {
        if (!entry.is_object() || !entry.contains("category")) continue;
        std::optional<taxonomy::DamageCategory> cat = category_from_json(entry["category"]);
        if (!cat) continue;
        std::string id = entry.contains("id") && entry["id"].is_string()
                             ? entry["id"].get<std::string>()
                             : "structure_" + std::to_string(scene.assessments.size());
        std::string rationale;
        if (entry.contains("rationale") && entry["rationale"].is_string())
          rationale = entry["rationale"].get<std::string>();
        Confidence conf = Confidence::medium;
        if (entry.contains("confidence") && entry["confidence"].is_string())
          conf = parse_confidence(entry["confidence"].get<std::string>());
        // ids outside the known inventory are kept but can't be trusted
        if (!known_ids.empty() &&
            std::find(known_ids.begin(), known_ids.end(), id) == known_ids.end())
          conf = Confidence::low;
        scene.assessments.push_back(make_assessment(std::move(id), *cat, std::move(rationale), conf));
      }
    }
    scene.distribution = parse_distribution(*block);
    if (block->contains("caveats") && (*block)["caveats"].is_string())
      scene.caveats = (*block)["caveats"].get<std::string>();
    if (block->contains("mmi") && (*block)["mmi"].is_string()) {
      try {
        scene.mmi = taxonomy::parse_mmi((*block)["mmi"].get<std::string>());
      } catch (const taxonomy::NoMmiFound&) {
      } catch (const taxonomy::InvalidRoman&) {
      }
    }
  }

  if (scene.assessments.empty()) scene.assessments = fallback_assessments(text, known_ids);
  return scene;
}

std::string render_structured_block(const SceneAssessment& scene) {
  json structures = json::array();
  for (const StructureAssessment& a : scene.assessments)
    structures.push_back({{"id", a.structure_id},
                          {"category", a.category.level()},
                          {"rationale", a.rationale},
                          {"confidence", std::string(confidence_name(a.confidence))}});
  json block{{"structures", std::move(structures)}};
  json dist = json::object();
  for (const auto& [cat, f] : scene.distribution) dist[std::to_string(cat.level())] = f;
  block["distribution"] = std::move(dist);
  if (scene.mmi) block["mmi"] = "MMI-" + std::string(scene.mmi->roman());
  block["caveats"] = scene.caveats;
  return "```json\n" + block.dump(2) + "\n```\n";
}

BaselineInventory parse_inventory_response(const std::string& text, const std::string& scene_id) {
  BaselineInventory inv;
  inv.scene_id = scene_id;
  inv.raw_response = text;

  std::optional<json> block = extract_json_block(text);
  if (block && block->contains("structures") && (*block)["structures"].is_array()) {
    for (const json& entry : (*block)["structures"]) {
      if (!entry.is_object()) continue;
      InventoryStructure s;
      s.structure_id = entry.contains("id") && entry["id"].is_string()
                           ? entry["id"].get<std::string>()
                           : "structure_" + std::to_string(inv.structures.size());
      // the assessment schema calls this field rationale; accept either name
      for (const char* key : {"description", "rationale"})
        if (entry.contains(key) && entry[key].is_string()) {
          s.description = entry[key].get<std::string>();
          break;
        }
      if (entry.contains("landmarks") && entry["landmarks"].is_array())
        for (const json& l : entry["landmarks"])
          if (l.is_string()) s.landmark_refs.push_back(l.get<std::string>());
      bool duplicate = std::any_of(
          inv.structures.begin(), inv.structures.end(),
          [&](const InventoryStructure& other) { return other.structure_id == s.structure_id; });
      if (!duplicate) inv.structures.push_back(std::move(s));
    }
  }

  if (inv.structures.empty() && !trim(text).empty()) {
    // no structured block: treat the whole scene as one described structure
    InventoryStructure s;
    s.structure_id = "scene";
    s.description = trim(text);
    inv.structures.push_back(std::move(s));
  }
  return inv;
}

namespace {

void add_frames(vlm::Message& message, const std::vector<enhance::EnhancedFrame>& frames) {
  for (int i : evenly_spaced_indices(static_cast<int>(frames.size()), kFramesPerPrompt))
    message.add_image(frames[static_cast<std::size_t>(i)].frame.image);
}

std::map<std::string, std::string> base_vars(const std::string& scene_id) {
  return {{"scene_id", scene_id},
          {"category_definitions", category_definitions_text()},
          {"schema", response_schema_text()}};
}

}  // namespace

BaselineInventory run_baseline_phase(vlm::ChatSession& session,
                                     const std::vector<enhance::EnhancedFrame>& pre_frames,
                                     const std::string& scene_id, const PromptSet& prompts) {
  if (pre_frames.empty()) throw EmptyInput("baseline phase needs at least one frame");
  if (!session.transcript().empty())
    throw Error("baseline phase requires a fresh session");
  vlm::Message m = vlm::Message::user(render_template(prompts.baseline, base_vars(scene_id)));
  add_frames(m, pre_frames);
  return parse_inventory_response(session.send(std::move(m)), scene_id);
}

SceneAssessment run_comparison_phase(vlm::ChatSession& session,
                                     const BaselineInventory& inventory,
                                     const std::vector<enhance::EnhancedFrame>& post_frames,
                                     const PromptSet& prompts) {
  if (post_frames.empty()) throw EmptyInput("comparison phase needs at least one frame");
  if (session.transcript().empty())
    throw Error("comparison phase must run on the baseline phase's session");
  vlm::Message m =
      vlm::Message::user(render_template(prompts.comparison, base_vars(inventory.scene_id)));
  add_frames(m, post_frames);
  std::vector<std::string> known_ids;
  for (const InventoryStructure& s : inventory.structures) known_ids.push_back(s.structure_id);
  return parse_scene_response(session.send(std::move(m)), inventory.scene_id, known_ids);
}

StructureAssessment assess_building_pair(vlm::ChatSession& session, const ingest::Frame& pre_crop,
                                         const ingest::Frame& post_crop,
                                         const std::string& building_id,
                                         const PromptSet& prompts) {
  if (!session.transcript().empty())
    throw Error("building assessment requires a fresh session");
  auto vars = base_vars(building_id);
  vars["building_id"] = building_id;
  vlm::Message m = vlm::Message::user(render_template(prompts.building_pair, vars));
  m.add_image(pre_crop.image);
  m.add_image(post_crop.image);
  std::string text = session.send(std::move(m));

  if (std::optional<json> block = extract_json_block(text)) {
    if (block->contains("structures") && (*block)["structures"].is_array()) {
      const json* chosen = nullptr;
      for (const json& entry : (*block)["structures"]) {
        if (!entry.is_object() || !entry.contains("category")) continue;
        if (!category_from_json(entry["category"])) continue;
        bool id_matches = entry.contains("id") && entry["id"].is_string() &&
                          entry["id"].get<std::string>() == building_id;
        if (id_matches) {
          chosen = &entry;
          break;
        }
        if (!chosen) chosen = &entry;
      }
      if (chosen) {
        std::string rationale;
        if (chosen->contains("rationale") && (*chosen)["rationale"].is_string())
          rationale = (*chosen)["rationale"].get<std::string>();
        Confidence conf = Confidence::medium;
        if (chosen->contains("confidence") && (*chosen)["confidence"].is_string())
          conf = parse_confidence((*chosen)["confidence"].get<std::string>());
        return make_assessment(building_id, *category_from_json((*chosen)["category"]),
                               std::move(rationale), conf);
      }
    }
  }
  // no usable structured block: keyword scan of the prose; NoCategoryFound
  // propagates and the caller records the building as unscored
  taxonomy::DamageCategory cat = taxonomy::parse_category(text);
  return make_assessment(building_id, cat, trim(text), Confidence::low);
}

taxonomy::MmiRank assess_mmi(vlm::ChatSession& session,
                             const std::vector<enhance::EnhancedFrame>& pre_frames,
                             const std::vector<enhance::EnhancedFrame>& post_frames,
                             const std::string& scene_id, const PromptSet& prompts) {
  if (pre_frames.empty() || post_frames.empty())
    throw EmptyInput("MMI ranking needs pre and post frames");
  if (!session.transcript().empty()) throw Error("MMI ranking requires a fresh session");
  vlm::Message m = vlm::Message::user(render_template(prompts.mmi, base_vars(scene_id)));
  m.add_text("Pre-disaster frames:");
  add_frames(m, pre_frames);
  m.add_text("Post-disaster frames:");
  add_frames(m, post_frames);
  std::string text = session.send(std::move(m));

  if (std::optional<json> block = extract_json_block(text))
    if (block->contains("mmi") && (*block)["mmi"].is_string())
      return taxonomy::parse_mmi((*block)["mmi"].get<std::string>());
  return taxonomy::parse_mmi(text);
}

taxonomy::MmiRank aggregate_mmi(const std::vector<taxonomy::MmiRank>& ranks) {
  if (ranks.empty()) throw EmptyInput("no MMI ranks to aggregate");
  return *std::max_element(ranks.begin(), ranks.end());
}

json scene_to_json(const SceneAssessment& scene) {
  json assessments = json::array();
  for (const StructureAssessment& a : scene.assessments) {
    json entry{{"structure_id", a.structure_id},
               {"category", std::string(a.category.canonical())},
               {"level", a.category.level()},
               {"concern", std::string(taxonomy::concern_name(a.concern))},
               {"rationale", a.rationale},
               {"confidence", std::string(confidence_name(a.confidence))}};
    entry["matched_building_id"] = a.matched_building_id ? json(*a.matched_building_id) : json();
    assessments.push_back(std::move(entry));
  }
  json dist = json::object();
  for (const auto& [cat, f] : scene.distribution) dist[std::string(cat.canonical())] = f;
  json out{{"scene_id", scene.scene_id},
           {"assessments", std::move(assessments)},
           {"distribution", std::move(dist)},
           {"caveats", scene.caveats},
           {"provenance",
            {{"enhancement_backend", scene.provenance.enhancement_backend},
             {"enhancement_scale", scene.provenance.enhancement_scale},
             {"model_name", scene.provenance.model_name},
             {"session_ids", scene.provenance.session_ids}}}};
  out["mmi"] = scene.mmi ? json(scene.mmi->display()) : json();
  return out;
}

SceneAssessment scene_from_json(const json& j) {
  SceneAssessment scene;
  scene.scene_id = j.at("scene_id").get<std::string>();
  for (const json& entry : j.at("assessments")) {
    auto cat = taxonomy::DamageCategory::from_canonical(entry.at("category").get<std::string>());
    if (!cat) throw ParseFailure("unknown category in scene json");
    StructureAssessment a = make_assessment(
        entry.at("structure_id").get<std::string>(), *cat,
        entry.value("rationale", std::string()),
        parse_confidence(entry.value("confidence", std::string("medium"))));
    if (entry.contains("matched_building_id") && entry["matched_building_id"].is_string())
      a.matched_building_id = entry["matched_building_id"].get<std::string>();
    scene.assessments.push_back(std::move(a));
  }
  if (j.contains("distribution"))
    for (const auto& [key, value] : j.at("distribution").items())
      if (auto cat = taxonomy::DamageCategory::from_canonical(key))
        scene.distribution[*cat] = value.get<double>();
  if (j.contains("mmi") && j["mmi"].is_string())
    scene.mmi = taxonomy::parse_mmi(j["mmi"].get<std::string>());
  scene.caveats = j.value("caveats", std::string());
  if (j.contains("provenance")) {
    const json& p = j["provenance"];
    scene.provenance.enhancement_backend = p.value("enhancement_backend", std::string());
    scene.provenance.enhancement_scale = p.value("enhancement_scale", 1);
    scene.provenance.model_name = p.value("model_name", std::string());
    if (p.contains("session_ids"))
      scene.provenance.session_ids = p["session_ids"].get<std::vector<std::string>>();
  }
  return scene;
}

}  // namespace aftermath::protocol
