#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aftermath/errors.hpp"
#include "aftermath/ingest.hpp"
#include "aftermath/metrics.hpp"
#include "aftermath/protocol.hpp"

namespace aftermath::report {

struct NoGeometry : Error {
  using Error::Error;
};

/// Top-level artifact of a run. The config snapshot holds every resolved
/// setting, so a report plus its config echo reproduces the run.
struct AssessmentReport {
  std::string run_id;
  std::string created_at;  // ISO-8601 UTC
  nlohmann::json config = nlohmann::json::object();
  std::vector<protocol::SceneAssessment> scenes;
  std::optional<metrics::EvaluationSummary> evaluation;
};

/// Seconds since the epoch, honoring SOURCE_DATE_EPOCH for reproducible runs.
std::int64_t resolve_epoch();
std::string format_utc(std::int64_t epoch_seconds);

/// Stable id from the resolved config and creation time.
std::string make_run_id(const nlohmann::json& config, const std::string& created_at);

nlohmann::json report_to_json(const AssessmentReport& r);
AssessmentReport report_from_json(const nlohmann::json& j);

/// Canonical JSON: sorted keys, 2-space indent, trailing newline. Byte-stable
/// across renders of equal reports.
std::string render_json(const AssessmentReport& r);

/// Human-readable summary: per-scene structure lists ordered by concern
/// (Severe first), the distribution table, the MMI line, caveats, and the
/// evaluation table when present.
std::string render_markdown(const AssessmentReport& r,
                            const metrics::BaselineTable* baseline = nullptr);

/// FeatureCollection of building polygons (pixel coordinates) with predicted
/// and truth categories. Throws NoGeometry when the scene has no polygons.
std::string render_geojson(const AssessmentReport& r, const ingest::ScenePair& scene);

}  // namespace aftermath::report
