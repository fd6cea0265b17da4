#include "aftermath/report.hpp"

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <map>
#include <sstream>

namespace aftermath::report {

using nlohmann::json;

std::int64_t resolve_epoch() {
  if (const char* v = std::getenv("SOURCE_DATE_EPOCH"); v && *v) {
    char* end = nullptr;
    long long parsed = std::strtoll(v, &end, 10);
    if (end && *end == '\0') return parsed;
  }
  return static_cast<std::int64_t>(std::time(nullptr));
}

std::string format_utc(std::int64_t epoch_seconds) {
  std::time_t t = static_cast<std::time_t>(epoch_seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string make_run_id(const json& config, const std::string& created_at) {
  return protocol::content_hash(config.dump() + "|" + created_at);
}

json report_to_json(const AssessmentReport& r) {
  json scenes = json::array();
  for (const protocol::SceneAssessment& s : r.scenes) scenes.push_back(protocol::scene_to_json(s));
  json out{{"run_id", r.run_id},
           {"created_at", r.created_at},
           {"config", r.config},
           {"scenes", std::move(scenes)}};
  out["evaluation"] = r.evaluation ? metrics::summary_to_json(*r.evaluation) : json();
  return out;
}

AssessmentReport report_from_json(const json& j) {
  AssessmentReport r;
  r.run_id = j.at("run_id").get<std::string>();
  r.created_at = j.at("created_at").get<std::string>();
  r.config = j.value("config", json::object());
  if (j.contains("scenes"))
    for (const json& s : j["scenes"]) r.scenes.push_back(protocol::scene_from_json(s));
  if (j.contains("evaluation") && !j["evaluation"].is_null())
    r.evaluation = metrics::summary_from_json(j["evaluation"]);
  return r;
}

std::string render_json(const AssessmentReport& r) {
  // nlohmann::json orders object keys, and numbers print in shortest
  // round-trip form, so equal reports render to equal bytes.
  return report_to_json(r).dump(2) + "\n";
}

namespace {

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", fraction * 100);
  return buf;
}

void render_scene(std::ostringstream& out, const protocol::SceneAssessment& scene) {
  out << "## Scene " << scene.scene_id << "\n\n";
  out << "MMI: " << (scene.mmi ? scene.mmi->display() : std::string("not ranked")) << "\n\n";

  if (!scene.assessments.empty()) {
    std::vector<const protocol::StructureAssessment*> ordered;
    for (const auto& a : scene.assessments) ordered.push_back(&a);
    std::stable_sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
      return static_cast<int>(a->concern) > static_cast<int>(b->concern);
    });
    out << "| Structure | Category | Concern | Confidence |\n";
    out << "|---|---|---|---|\n";
    for (const auto* a : ordered)
      out << "| " << a->structure_id << " | " << a->category.display_name() << " | "
          << taxonomy::concern_name(a->concern) << " | "
          << protocol::confidence_name(a->confidence) << " |\n";
    out << "\n";
  }

  if (!scene.distribution.empty()) {
    out << "### Damage distribution\n\n";
    out << "| Category | Share |\n";
    out << "|---|---|\n";
    // Severe first, matching the structure ordering above.
    auto cats = taxonomy::DamageCategory::all();
    for (auto it = cats.rbegin(); it != cats.rend(); ++it) {
      auto found = scene.distribution.find(*it);
      if (found != scene.distribution.end())
        out << "| " << it->display_name() << " | " << percent(found->second) << " |\n";
    }
    out << "\n";
  }

  if (!scene.caveats.empty()) out << "Caveats: " << scene.caveats << "\n\n";
}

}  // namespace

std::string render_markdown(const AssessmentReport& r, const metrics::BaselineTable* baseline) {
  std::ostringstream out;
  out << "# Damage Assessment Report\n\n";
  out << "- run: " << r.run_id << "\n";
  out << "- created: " << r.created_at << "\n";
  if (r.config.contains("enhance"))
    out << "- enhancement: " << r.config["enhance"].value("backend", std::string("?")) << " x"
        << r.config["enhance"].value("scale", 0) << "\n";
  if (r.config.contains("vlm"))
    out << "- model: " << r.config["vlm"].value("model", std::string("?")) << "\n";
  if (r.config.contains("prompts"))
    out << "- prompts: " << r.config["prompts"].value("version_hash", std::string("?")) << "\n";
  out << "\n";

  for (const protocol::SceneAssessment& scene : r.scenes) render_scene(out, scene);

  if (r.evaluation) {
    out << "## Evaluation\n\n";
    out << "```\n" << metrics::render_metrics_table(*r.evaluation, baseline) << "```\n";
  }
  return out.str();
}

std::string render_geojson(const AssessmentReport& r, const ingest::ScenePair& scene) {
  if (scene.buildings.empty())
    throw NoGeometry("scene " + scene.scene_id + " carries no building polygons");

  // predictions by building id, from the matching scene's assessments
  std::map<std::string, const protocol::StructureAssessment*> by_building;
  for (const protocol::SceneAssessment& s : r.scenes) {
    if (s.scene_id != scene.scene_id) continue;
    for (const protocol::StructureAssessment& a : s.assessments) {
      const std::string& key = a.matched_building_id ? *a.matched_building_id : a.structure_id;
      by_building.emplace(key, &a);
    }
  }

  json features = json::array();
  for (const ingest::BuildingRecord& b : scene.buildings) {
    json ring = json::array();
    for (auto [x, y] : b.polygon) ring.push_back(json::array({x, y}));
    if (!b.polygon.empty())
      ring.push_back(json::array({b.polygon[0].first, b.polygon[0].second}));

    json props{{"building_id", b.building_id}};
    auto it = by_building.find(b.building_id);
    props["predicted"] =
        it != by_building.end() ? json(std::string(it->second->category.canonical())) : json();
    props["concern"] = it != by_building.end()
                           ? json(std::string(taxonomy::concern_name(it->second->concern)))
                           : json();
    std::optional<taxonomy::DamageCategory> truth;
    if (b.truth_label) truth = taxonomy::map_xbd_to_category(*b.truth_label);
    props["truth"] = truth ? json(std::string(truth->canonical())) : json();

    features.push_back({{"type", "Feature"},
                        {"geometry",
                         {{"type", "Polygon"},
                          {"coordinates", json::array({std::move(ring)})}}},
                        {"properties", std::move(props)}});
  }

  json doc{{"type", "FeatureCollection"}, {"features", std::move(features)}};
  return doc.dump(2) + "\n";
}

}  // namespace aftermath::report
