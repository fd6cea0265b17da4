#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "aftermath/enhance.hpp"
#include "aftermath/vlm.hpp"

namespace aftermath::config {

struct IngestSection {
  int stride = 10;         // every Nth source frame
  int pseudo_count = 5;    // pseudo-frames per static image
  double pad = 0.25;       // building crop padding, fraction of the bbox span
  std::optional<double> fps_override;
};

struct VlmSection {
  std::string endpoint = "http://127.0.0.1:8077";
  std::string model = "vlm-27b";
  double temperature = 0.0;
  int max_output_tokens = 2048;
  double timeout_s = 120.0;
  int max_image_edge = 2048;
  int repetitions = 1;  // MMI repetitions per scene
  int concurrency = 2;  // in-flight request cap
};

/// Pinned identity of a run. Populated by the resolved-config echo so a
/// re-run reproduces report bytes exactly.
struct RunSection {
  std::optional<std::int64_t> created_at_epoch;
  std::optional<std::string> run_id;
};

struct RunConfig {
  IngestSection ingest;
  enhance::EnhancementConfig enhance;
  VlmSection vlm;
  std::filesystem::path prompts_dir = "prompts";
  std::filesystem::path out_dir = "out";
  std::optional<std::filesystem::path> cache_dir;
  RunSection run;

  aftermath::vlm::VlmConfig vlm_config() const;
  /// Snapshot embedded in reports; excludes the run section (the run id is
  /// derived from this snapshot, so including it would be circular).
  nlohmann::json to_json() const;
  std::string to_toml() const;  // fully resolved echo, round-trips exactly

  static RunConfig from_toml(const std::string& text);  // throws ConfigError
  static RunConfig from_toml_file(const std::filesystem::path& path);

  /// AFTERMATH_VLM_URL / AFTERMATH_SR_URL. Call between file load and flag
  /// overrides: flags beat env beats file.
  void apply_env();
};

/// Parsed key/value view of the TOML subset this project uses: [section]
/// headers, key = value lines, quoted strings, ints, floats, bools, and #
/// comments. Exposed for tests.
std::map<std::string, std::map<std::string, std::string>> parse_toml(const std::string& text);

}  // namespace aftermath::config
