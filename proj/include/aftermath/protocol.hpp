#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aftermath/enhance.hpp"
#include "aftermath/errors.hpp"
#include "aftermath/taxonomy.hpp"
#include "aftermath/vlm.hpp"

namespace aftermath::protocol {

struct ParseFailure : Error {
  using Error::Error;
};
struct EmptyInput : Error {
  using Error::Error;
};
struct PromptError : Error {
  using Error::Error;
};

enum class Confidence { low, medium, high };
std::string_view confidence_name(Confidence c);
Confidence parse_confidence(std::string_view s);  // unknown strings parse low

struct InventoryStructure {
  std::string structure_id;
  std::string description;
  std::vector<std::string> landmark_refs;
};

/// Pre-disaster structure inventory, the reference the comparison phase
/// works against.
struct BaselineInventory {
  std::string scene_id;
  std::vector<InventoryStructure> structures;  // ids unique within the scene
  std::string raw_response;
};

struct StructureAssessment {
  std::string structure_id;
  taxonomy::DamageCategory category = taxonomy::kNoSlightDamage;
  taxonomy::ConcernLevel concern = taxonomy::ConcernLevel::Least;
  std::string rationale;
  Confidence confidence = Confidence::medium;
  std::optional<std::string> matched_building_id;

  bool operator==(const StructureAssessment&) const = default;
};

/// Sole constructor path; keeps concern the bijective image of category.
StructureAssessment make_assessment(std::string structure_id, taxonomy::DamageCategory category,
                                    std::string rationale, Confidence confidence);

struct Provenance {
  std::string enhancement_backend;
  int enhancement_scale = 1;
  std::string model_name;
  std::vector<std::string> session_ids;

  bool operator==(const Provenance&) const = default;
};

struct SceneAssessment {
  std::string scene_id;
  std::vector<StructureAssessment> assessments;
  std::map<taxonomy::DamageCategory, double> distribution;  // fractions, sums to ~1
  std::optional<taxonomy::MmiRank> mmi;
  std::string caveats;
  Provenance provenance;

  bool operator==(const SceneAssessment&) const = default;
};

// Prompt templates. Files live in a prompts directory; {scene_id},
// {category_definitions}, {schema} and {building_id} are substituted at send
// time. version_hash covers all four files, so reports can attribute results
// to exact wording.
struct PromptSet {
  std::string baseline;
  std::string comparison;
  std::string building_pair;
  std::string mmi;
  std::string version_hash;

  static PromptSet load(const std::filesystem::path& dir);  // throws PromptError
};

std::string render_template(std::string_view text,
                            const std::map<std::string, std::string>& vars);
std::string category_definitions_text();
std::string response_schema_text();

/// Indices of up to k frames spread evenly across an n-frame sequence,
/// first and last always included.
std::vector<int> evenly_spaced_indices(int n, int k);

/// Frames shown per prompt; multimodal endpoints cap image counts.
inline constexpr int kFramesPerPrompt = 4;

// Structured-response handling. Responses carry a fenced JSON block
// conforming to the published schema; parse_* fall back to keyword scanning
// when the block is missing or malformed.
std::optional<nlohmann::json> extract_json_block(const std::string& text);

/// Parses a comparison/assessment response. Entries whose id is not in
/// known_ids are kept with confidence forced low. Fallback keyword parsing
/// produces low-confidence assessments; mentions matching no known id get
/// ids unmatched_<n>.
SceneAssessment parse_scene_response(const std::string& text, const std::string& scene_id,
                                     const std::vector<std::string>& known_ids);

/// Re-renders the structured block of an assessment; parsing the result
/// reproduces the assessment (round-trip property).
std::string render_structured_block(const SceneAssessment& scene);

BaselineInventory parse_inventory_response(const std::string& text, const std::string& scene_id);

// The two-phase scene flow plus the building-level and MMI flows. Sessions
// are caller-created so each flow can enforce its freshness rule.
BaselineInventory run_baseline_phase(vlm::ChatSession& session,
                                     const std::vector<enhance::EnhancedFrame>& pre_frames,
                                     const std::string& scene_id, const PromptSet& prompts);

SceneAssessment run_comparison_phase(vlm::ChatSession& session,
                                     const BaselineInventory& inventory,
                                     const std::vector<enhance::EnhancedFrame>& post_frames,
                                     const PromptSet& prompts);

/// Single-exchange classification of one building from its crop pair.
/// Throws taxonomy::NoCategoryFound when no category can be extracted; the
/// caller records the building as unscored.
StructureAssessment assess_building_pair(vlm::ChatSession& session, const ingest::Frame& pre_crop,
                                         const ingest::Frame& post_crop,
                                         const std::string& building_id,
                                         const PromptSet& prompts);

/// Throws taxonomy::NoMmiFound when the response carries no rank; the caller
/// flags the scene unranked.
taxonomy::MmiRank assess_mmi(vlm::ChatSession& session,
                             const std::vector<enhance::EnhancedFrame>& pre_frames,
                             const std::vector<enhance::EnhancedFrame>& post_frames,
                             const std::string& scene_id, const PromptSet& prompts);

/// Maximum rank across scenes.
taxonomy::MmiRank aggregate_mmi(const std::vector<taxonomy::MmiRank>& ranks);  // throws EmptyInput

/// FNV-1a over file contents, hex; stable across platforms.
std::string content_hash(std::string_view data);

// JSON (de)serialization used by reports and fixtures.
nlohmann::json scene_to_json(const SceneAssessment& scene);
SceneAssessment scene_from_json(const nlohmann::json& j);

}  // namespace aftermath::protocol
