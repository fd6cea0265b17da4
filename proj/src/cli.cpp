#include "aftermath/cli.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "aftermath/config.hpp"
#include "aftermath/enhance.hpp"
#include "aftermath/ingest.hpp"
#include "aftermath/metrics.hpp"
#include "aftermath/protocol.hpp"
#include "aftermath/report.hpp"
#include "aftermath/vlm.hpp"

namespace aftermath::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::optional<std::string> config_path;
  std::optional<int> stride, pseudo_count;
  std::optional<double> pad, fps_override;
  std::optional<std::string> enhance_backend;
  std::optional<int> scale, window;
  std::optional<std::string> sr_url, vlm_url, model;
  std::optional<double> temperature;
  std::optional<int> max_output_tokens;
  std::optional<double> timeout_s;
  std::optional<int> max_image_edge, repetitions, concurrency;
  std::optional<std::string> prompts_dir, out_dir, cache_dir;
};

void add_common_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "Config file (TOML)");
  cmd->add_option("--stride", o.stride, "Keep every Nth source frame");
  cmd->add_option("--pseudo-count", o.pseudo_count, "Pseudo-frames per static image");
  cmd->add_option("--pad", o.pad, "Building crop padding fraction");
  cmd->add_option("--fps-override", o.fps_override, "Source fps when stream metadata is missing");
  cmd->add_option("--enhance", o.enhance_backend, "Enhancement backend: service|bicubic|identity");
  cmd->add_option("--scale", o.scale, "Enhancement scale factor");
  cmd->add_option("--window", o.window, "Frames per SR service request");
  cmd->add_option("--sr-url", o.sr_url, "SR service URL");
  cmd->add_option("--vlm-url", o.vlm_url, "VLM endpoint URL");
  cmd->add_option("--model", o.model, "VLM model name");
  cmd->add_option("--temperature", o.temperature, "VLM sampling temperature");
  cmd->add_option("--max-output-tokens", o.max_output_tokens, "VLM output token cap");
  cmd->add_option("--timeout", o.timeout_s, "VLM request timeout, seconds");
  cmd->add_option("--max-image-edge", o.max_image_edge, "Downscale images beyond this edge");
  cmd->add_option("--repetitions", o.repetitions, "MMI repetitions per scene");
  cmd->add_option("--concurrency", o.concurrency, "In-flight VLM request cap");
  cmd->add_option("--prompts", o.prompts_dir, "Prompt template directory");
  cmd->add_option("--out", o.out_dir, "Output directory");
  cmd->add_option("--cache", o.cache_dir, "Enhancement cache directory");
}

config::RunConfig resolve_config(const Overrides& o) {
  config::RunConfig cfg;
  if (o.config_path) cfg = config::RunConfig::from_toml_file(*o.config_path);
  cfg.apply_env();  // flags beat env beats file
  if (o.stride) cfg.ingest.stride = *o.stride;
  if (o.pseudo_count) cfg.ingest.pseudo_count = *o.pseudo_count;
  if (o.pad) cfg.ingest.pad = *o.pad;
  if (o.fps_override) cfg.ingest.fps_override = *o.fps_override;
  if (o.enhance_backend) cfg.enhance.backend = enhance::parse_backend(*o.enhance_backend);
  if (o.scale) cfg.enhance.scale = *o.scale;
  if (o.window) cfg.enhance.window = *o.window;
  if (o.sr_url) cfg.enhance.service_url = *o.sr_url;
  if (o.vlm_url) cfg.vlm.endpoint = *o.vlm_url;
  if (o.model) cfg.vlm.model = *o.model;
  if (o.temperature) cfg.vlm.temperature = *o.temperature;
  if (o.max_output_tokens) cfg.vlm.max_output_tokens = *o.max_output_tokens;
  if (o.timeout_s) cfg.vlm.timeout_s = *o.timeout_s;
  if (o.max_image_edge) cfg.vlm.max_image_edge = *o.max_image_edge;
  if (o.repetitions) cfg.vlm.repetitions = *o.repetitions;
  if (o.concurrency) cfg.vlm.concurrency = *o.concurrency;
  if (o.prompts_dir) cfg.prompts_dir = *o.prompts_dir;
  if (o.out_dir) cfg.out_dir = *o.out_dir;
  if (o.cache_dir) cfg.cache_dir = *o.cache_dir;
  // round through the echo format: validates the merge and proves the echo
  // re-parses to the same configuration
  return config::RunConfig::from_toml(cfg.to_toml());
}

/// Resolved run identity, pinned by the config echo when present.
struct RunIdentity {
  std::int64_t epoch;
  std::string created_at;
  std::string run_id;
  json snapshot;
};

RunIdentity make_identity(config::RunConfig& cfg, const std::string& prompt_hash) {
  RunIdentity id;
  id.epoch = cfg.run.created_at_epoch ? *cfg.run.created_at_epoch : report::resolve_epoch();
  id.created_at = report::format_utc(id.epoch);
  id.snapshot = cfg.to_json();
  id.snapshot["prompts"]["version_hash"] = prompt_hash;
  id.run_id = cfg.run.run_id ? *cfg.run.run_id : report::make_run_id(id.snapshot, id.created_at);
  cfg.run.created_at_epoch = id.epoch;
  cfg.run.run_id = id.run_id;
  return id;
}

void write_text(const fs::path& path, const std::string& text) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void write_config_echo(const config::RunConfig& cfg) {
  write_text(cfg.out_dir / "config_resolved.toml", cfg.to_toml());
}

/// Frame source dispatch: a directory of PNGs, a single PNG (pseudo-frames),
/// or anything else handed to the external video decoder.
ingest::FrameSequence load_frames(const fs::path& input, ingest::Phase phase,
                                  const std::string& scene_id, const config::RunConfig& cfg) {
  if (fs::is_directory(input))
    return ingest::read_frame_dir(input, phase, scene_id,
                                  cfg.ingest.fps_override.value_or(1.0));
  if (input.extension() == ".png")
    return ingest::make_pseudo_frames(img::read_png(input), cfg.ingest.pseudo_count, phase,
                                      scene_id);
  auto stream = ingest::open_video(input, cfg.ingest.fps_override);
  return ingest::sample_frames(*stream, cfg.ingest.stride, phase, scene_id);
}

void parallel_scenes(int limit, int n, const std::function<void(int)>& fn) {
  limit = std::clamp(limit, 1, std::max(1, n));
  if (limit == 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  for (int w = 0; w < limit; ++w)
    workers.emplace_back([&] {
      for (int i; (i = next.fetch_add(1)) < n;) fn(i);
    });
  for (auto& t : workers) t.join();
}

int classify_error(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const protocol::PromptError*>(&e))
    return kExitConfig;
  if (dynamic_cast<const ingest::SchemaError*>(&e) ||
      dynamic_cast<const ingest::GeometryError*>(&e))
    return kExitDataset;
  if (dynamic_cast<const ingest::DecodeFailure*>(&e) ||
      dynamic_cast<const ingest::EmptyStream*>(&e) ||
      dynamic_cast<const img::ImageDecodeFailure*>(&e))
    return kExitIngest;
  return kExitAssessment;
}

// ---- sample / pseudo / enhance ----

int cmd_sample(const Overrides& o, const std::string& input, const std::string& phase,
               const std::string& scene) {
  config::RunConfig cfg = resolve_config(o);
  auto stream = ingest::open_video(input, cfg.ingest.fps_override);
  ingest::FrameSequence seq =
      ingest::sample_frames(*stream, cfg.ingest.stride, ingest::parse_phase(phase), scene);
  ingest::write_frame_dir(cfg.out_dir, seq);
  write_config_echo(cfg);
  std::cout << "wrote " << seq.frames.size() << " frames ("
            << seq.effective_fps() << " fps) to "
            << (cfg.out_dir / scene / phase).string() << "\n";
  return kExitOk;
}

int cmd_pseudo(const Overrides& o, const std::string& image, const std::string& phase,
               const std::string& scene) {
  config::RunConfig cfg = resolve_config(o);
  ingest::FrameSequence seq = ingest::make_pseudo_frames(
      img::read_png(image), cfg.ingest.pseudo_count, ingest::parse_phase(phase), scene);
  ingest::write_frame_dir(cfg.out_dir, seq);
  write_config_echo(cfg);
  std::cout << "wrote " << seq.frames.size() << " pseudo-frames to "
            << (cfg.out_dir / scene / phase).string() << "\n";
  return kExitOk;
}

int cmd_enhance(const Overrides& o, const std::string& frames_root, const std::string& phase,
                const std::string& scene) {
  config::RunConfig cfg = resolve_config(o);
  ingest::Phase ph = ingest::parse_phase(phase);
  ingest::FrameSequence seq =
      ingest::read_frame_dir(fs::path(frames_root) / scene / phase, ph, scene, 1.0);
  // route outputs through the cache layout under --out
  auto enhanced = enhance::enhance_sequence(seq, cfg.enhance, cfg.out_dir);
  write_config_echo(cfg);
  std::cout << "enhanced " << enhanced.size() << " frames ("
            << enhanced.front().frame.image.width << "x" << enhanced.front().frame.image.height
            << ") to " << enhance::cache_dir(cfg.out_dir, scene, ph, cfg.enhance).string()
            << "\n";
  return kExitOk;
}

// ---- assess-scene ----

int cmd_assess_scene(const Overrides& o, const std::string& pre, const std::string& post,
                     const std::string& scene, bool with_mmi) {
  config::RunConfig cfg = resolve_config(o);
  protocol::PromptSet prompts = protocol::PromptSet::load(cfg.prompts_dir);
  vlm::set_request_concurrency(cfg.vlm.concurrency);
  RunIdentity id = make_identity(cfg, prompts.version_hash);

  ingest::FrameSequence pre_seq = load_frames(pre, ingest::Phase::pre, scene, cfg);
  ingest::FrameSequence post_seq = load_frames(post, ingest::Phase::post, scene, cfg);

  auto enhanced_pre = enhance::enhance_sequence(pre_seq, cfg.enhance, cfg.cache_dir);
  auto enhanced_post = enhance::enhance_sequence(post_seq, cfg.enhance, cfg.cache_dir);

  vlm::ChatSession session = vlm::new_session(cfg.vlm_config(), scene + "#assess");
  protocol::BaselineInventory inventory =
      protocol::run_baseline_phase(session, enhanced_pre, scene, prompts);
  protocol::SceneAssessment assessment =
      protocol::run_comparison_phase(session, inventory, enhanced_post, prompts);
  assessment.provenance.enhancement_backend = std::string(enhance::backend_name(cfg.enhance.backend));
  assessment.provenance.enhancement_scale = cfg.enhance.effective_scale();
  assessment.provenance.model_name = cfg.vlm.model;
  assessment.provenance.session_ids.push_back(session.session_id());

  if (with_mmi && !assessment.mmi) {
    vlm::ChatSession mmi_session = vlm::new_session(cfg.vlm_config(), scene + "#mmi");
    assessment.provenance.session_ids.push_back(mmi_session.session_id());
    try {
      assessment.mmi =
          protocol::assess_mmi(mmi_session, enhanced_pre, enhanced_post, scene, prompts);
    } catch (const taxonomy::NoMmiFound&) {
      std::cerr << "scene " << scene << ": no MMI rank in response, left unranked\n";
    }
  }

  report::AssessmentReport rep;
  rep.run_id = id.run_id;
  rep.created_at = id.created_at;
  rep.config = id.snapshot;
  rep.scenes.push_back(std::move(assessment));

  write_text(cfg.out_dir / "report.json", report::render_json(rep));
  write_text(cfg.out_dir / "report.md", report::render_markdown(rep));
  write_config_echo(cfg);
  std::cout << "assessed scene " << scene << ", report in " << cfg.out_dir.string() << "\n";
  return kExitOk;
}

// ---- eval-xbd ----

struct XbdScene {
  std::string scene_id;
  ingest::XbdSceneFiles files;
};

std::vector<XbdScene> discover_xbd_scenes(const fs::path& data, const std::string& subset) {
  const std::string post_suffix = "_post_disaster.json";
  if (!fs::is_directory(data / "labels"))
    throw ingest::SchemaError("no labels/ directory under " + data.string());
  std::vector<XbdScene> scenes;
  for (const auto& entry : fs::directory_iterator(data / "labels")) {
    std::string name = entry.path().filename().string();
    if (name.size() <= post_suffix.size() ||
        name.compare(name.size() - post_suffix.size(), post_suffix.size(), post_suffix) != 0)
      continue;
    std::string scene_id = name.substr(0, name.size() - post_suffix.size());
    if (!subset.empty() && scene_id.find(subset) == std::string::npos) continue;
    XbdScene s;
    s.scene_id = scene_id;
    s.files.label_post = entry.path();
    s.files.label_pre = data / "labels" / (scene_id + "_pre_disaster.json");
    s.files.image_pre = data / "images" / (scene_id + "_pre_disaster.png");
    s.files.image_post = data / "images" / (scene_id + "_post_disaster.png");
    scenes.push_back(std::move(s));
  }
  std::sort(scenes.begin(), scenes.end(),
            [](const XbdScene& a, const XbdScene& b) { return a.scene_id < b.scene_id; });
  if (scenes.empty())
    throw ingest::SchemaError("no scenes matching subset \"" + subset + "\" under " +
                              data.string());
  return scenes;
}

struct SceneEvalResult {
  protocol::SceneAssessment assessment;
  std::vector<metrics::PredictionRecord> records;
  std::optional<std::string> error;
};

SceneEvalResult eval_one_scene(const ingest::ScenePair& pair, const config::RunConfig& cfg,
                               const protocol::PromptSet& prompts) {
  SceneEvalResult result;
  result.assessment.scene_id = pair.scene_id;
  result.assessment.provenance.enhancement_backend =
      std::string(enhance::backend_name(cfg.enhance.backend));
  result.assessment.provenance.enhancement_scale = cfg.enhance.effective_scale();
  result.assessment.provenance.model_name = cfg.vlm.model;

  auto record_all_unscored = [&] {
    for (const ingest::BuildingRecord& b : pair.buildings) {
      metrics::PredictionRecord r;
      r.scene = pair.scene_id;
      r.building_id = b.building_id;
      if (b.truth_label) r.truth = taxonomy::map_xbd_to_category(*b.truth_label);
      result.records.push_back(std::move(r));
    }
  };

  std::vector<enhance::EnhancedFrame> pre, post;
  try {
    pre = enhance::enhance_sequence(pair.pre, cfg.enhance, cfg.cache_dir);
    post = enhance::enhance_sequence(pair.post, cfg.enhance, cfg.cache_dir);
  } catch (const Error& e) {
    // enhancement failures fail the scene, not the batch
    result.error = e.what();
    record_all_unscored();
    return result;
  }

  int scale = cfg.enhance.effective_scale();
  for (const ingest::BuildingRecord& b : pair.buildings) {
    metrics::PredictionRecord r;
    r.scene = pair.scene_id;
    r.building_id = b.building_id;
    if (b.truth_label) r.truth = taxonomy::map_xbd_to_category(*b.truth_label);

    ingest::BuildingRecord scaled = ingest::scale_building(b, scale);
    vlm::ChatSession session =
        vlm::new_session(cfg.vlm_config(), "xbd:" + pair.scene_id + ":" + b.building_id);
    result.assessment.provenance.session_ids.push_back(session.session_id());
    try {
      ingest::Frame pre_crop =
          ingest::crop_building(pre.front().frame, scaled, cfg.ingest.pad);
      ingest::Frame post_crop =
          ingest::crop_building(post.front().frame, scaled, cfg.ingest.pad);
      protocol::StructureAssessment a =
          protocol::assess_building_pair(session, pre_crop, post_crop, b.building_id, prompts);
      a.matched_building_id = b.building_id;
      r.predicted = a.category;
      result.assessment.assessments.push_back(std::move(a));
    } catch (const Error& e) {
      std::cerr << pair.scene_id << "/" << b.building_id << ": unscored (" << e.what() << ")\n";
    }
    result.records.push_back(std::move(r));
  }
  return result;
}

int cmd_eval_xbd(const Overrides& o, const std::string& data, const std::string& subset,
                 const std::optional<std::string>& baseline_csv) {
  config::RunConfig cfg = resolve_config(o);
  protocol::PromptSet prompts = protocol::PromptSet::load(cfg.prompts_dir);
  vlm::set_request_concurrency(cfg.vlm.concurrency);
  RunIdentity id = make_identity(cfg, prompts.version_hash);

  std::optional<metrics::BaselineTable> baseline;
  if (baseline_csv) baseline = metrics::BaselineTable::load(*baseline_csv);

  std::vector<XbdScene> scenes = discover_xbd_scenes(data, subset);
  std::vector<ingest::ScenePair> pairs;
  pairs.reserve(scenes.size());
  for (const XbdScene& s : scenes)
    pairs.push_back(ingest::load_xbd_scene(s.files, s.scene_id, cfg.ingest.pseudo_count));

  std::vector<SceneEvalResult> results(pairs.size());
  parallel_scenes(cfg.vlm.concurrency, static_cast<int>(pairs.size()), [&](int i) {
    results[static_cast<std::size_t>(i)] =
        eval_one_scene(pairs[static_cast<std::size_t>(i)], cfg, prompts);
  });

  std::vector<metrics::PredictionRecord> records;
  report::AssessmentReport rep;
  rep.run_id = id.run_id;
  rep.created_at = id.created_at;
  rep.config = id.snapshot;
  int failed = 0;
  for (SceneEvalResult& r : results) {
    if (r.error) {
      ++failed;
      std::cerr << "scene " << r.assessment.scene_id << " failed: " << *r.error << "\n";
    }
    records.insert(records.end(), r.records.begin(), r.records.end());
    rep.scenes.push_back(std::move(r.assessment));
  }

  metrics::ConfusionMatrix cm = metrics::accumulate_records(records);
  rep.evaluation = metrics::summarize(cm, baseline ? &*baseline : nullptr);

  fs::create_directories(cfg.out_dir);
  {
    std::ofstream out(cfg.out_dir / "predictions.jsonl", std::ios::binary);
    metrics::write_predictions(out, records);
  }
  write_text(cfg.out_dir / "metrics.json",
             metrics::summary_to_json(*rep.evaluation).dump(2) + "\n");
  write_text(cfg.out_dir / "report.json", report::render_json(rep));
  write_text(cfg.out_dir / "report.md",
             report::render_markdown(rep, baseline ? &*baseline : nullptr));
  for (const ingest::ScenePair& pair : pairs)
    if (!pair.buildings.empty())
      write_text(cfg.out_dir / ("scene_" + pair.scene_id + ".geojson"),
                 report::render_geojson(rep, pair));
  write_config_echo(cfg);

  std::cout << metrics::render_metrics_table(*rep.evaluation, baseline ? &*baseline : nullptr);
  if (failed == static_cast<int>(results.size())) return kExitAssessment;
  return kExitOk;
}

// ---- mmi ----

int cmd_mmi(const Overrides& o, const std::string& scenes_root) {
  config::RunConfig cfg = resolve_config(o);
  protocol::PromptSet prompts = protocol::PromptSet::load(cfg.prompts_dir);
  vlm::set_request_concurrency(cfg.vlm.concurrency);
  RunIdentity id = make_identity(cfg, prompts.version_hash);

  std::vector<std::string> scene_ids;
  for (const auto& entry : fs::directory_iterator(scenes_root))
    if (entry.is_directory() && fs::is_directory(entry.path() / "pre") &&
        fs::is_directory(entry.path() / "post"))
      scene_ids.push_back(entry.path().filename().string());
  std::sort(scene_ids.begin(), scene_ids.end());
  if (scene_ids.empty())
    throw ingest::SchemaError("no scene directories (with pre/ and post/) under " + scenes_root);

  struct SceneRanks {
    std::vector<std::optional<taxonomy::MmiRank>> reps;
    std::optional<std::string> error;
  };
  std::vector<SceneRanks> ranks(scene_ids.size());

  parallel_scenes(cfg.vlm.concurrency, static_cast<int>(scene_ids.size()), [&](int i) {
    const std::string& scene = scene_ids[static_cast<std::size_t>(i)];
    SceneRanks& out = ranks[static_cast<std::size_t>(i)];
    try {
      fs::path dir = fs::path(scenes_root) / scene;
      auto pre_seq = ingest::read_frame_dir(dir / "pre", ingest::Phase::pre, scene, 1.0);
      auto post_seq = ingest::read_frame_dir(dir / "post", ingest::Phase::post, scene, 1.0);
      auto pre = enhance::enhance_sequence(pre_seq, cfg.enhance, cfg.cache_dir);
      auto post = enhance::enhance_sequence(post_seq, cfg.enhance, cfg.cache_dir);
      for (int rep = 1; rep <= cfg.vlm.repetitions; ++rep) {
        // isolation rule: a fresh session for every single ranking
        vlm::ChatSession session =
            vlm::new_session(cfg.vlm_config(), scene + "#mmi-r" + std::to_string(rep));
        try {
          out.reps.push_back(protocol::assess_mmi(session, pre, post, scene, prompts));
        } catch (const taxonomy::NoMmiFound&) {
          out.reps.push_back(std::nullopt);
        }
      }
    } catch (const Error& e) {
      out.error = e.what();
    }
  });

  json scenes_json = json::array();
  std::vector<taxonomy::MmiRank> all_ranks;
  std::ostringstream md;
  md << "# MMI Rankings\n\n";
  md << "- run: " << id.run_id << "\n";
  md << "- enhancement: " << enhance::backend_name(cfg.enhance.backend) << " x"
     << cfg.enhance.effective_scale() << "\n";
  md << "- model: " << cfg.vlm.model << "\n\n";
  md << "| Scene | Ranks | Aggregate |\n|---|---|---|\n";

  int ranked_scenes = 0;
  for (std::size_t i = 0; i < scene_ids.size(); ++i) {
    json entry{{"scene_id", scene_ids[i]}};
    std::vector<taxonomy::MmiRank> scene_ranks;
    json rep_list = json::array();
    for (const auto& r : ranks[i].reps) {
      rep_list.push_back(r ? json("MMI-" + std::string(r->roman())) : json());
      if (r) scene_ranks.push_back(*r);
    }
    entry["ranks"] = std::move(rep_list);
    std::string rank_text, agg_text = "unranked";
    for (std::size_t k = 0; k < ranks[i].reps.size(); ++k) {
      if (k) rank_text += ", ";
      rank_text += ranks[i].reps[k] ? ranks[i].reps[k]->display() : "unranked";
    }
    if (!scene_ranks.empty()) {
      taxonomy::MmiRank agg = protocol::aggregate_mmi(scene_ranks);
      entry["aggregate"] = "MMI-" + std::string(agg.roman());
      agg_text = agg.display();
      all_ranks.push_back(agg);
      ++ranked_scenes;
    } else {
      entry["aggregate"] = json();
      if (ranks[i].error) {
        entry["error"] = *ranks[i].error;
        rank_text = "failed";
      }
    }
    md << "| " << scene_ids[i] << " | " << rank_text << " | " << agg_text << " |\n";
    scenes_json.push_back(std::move(entry));
  }

  json doc{{"run_id", id.run_id},
           {"created_at", id.created_at},
           {"backend", std::string(enhance::backend_name(cfg.enhance.backend))},
           {"scale", cfg.enhance.effective_scale()},
           {"model", cfg.vlm.model},
           {"repetitions", cfg.vlm.repetitions},
           {"scenes", std::move(scenes_json)}};
  doc["overall"] =
      all_ranks.empty() ? json() : json("MMI-" + std::string(protocol::aggregate_mmi(all_ranks).roman()));
  md << "\nOverall: "
     << (all_ranks.empty() ? std::string("unranked") : protocol::aggregate_mmi(all_ranks).display())
     << "\n";

  write_text(cfg.out_dir / "mmi.json", doc.dump(2) + "\n");
  write_text(cfg.out_dir / "mmi.md", md.str());
  write_config_echo(cfg);
  std::cout << md.str();
  return ranked_scenes == 0 ? kExitAssessment : kExitOk;
}

// ---- report / compare ----

json load_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ingest::SchemaError("cannot read " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ingest::SchemaError("not valid JSON: " + path.string());
  return doc;
}

int cmd_report(const Overrides& o, const std::string& in_path,
               const std::optional<std::string>& baseline_csv) {
  config::RunConfig cfg = resolve_config(o);
  report::AssessmentReport rep = report::report_from_json(load_json_file(in_path));
  std::optional<metrics::BaselineTable> baseline;
  if (baseline_csv) baseline = metrics::BaselineTable::load(*baseline_csv);
  std::string md = report::render_markdown(rep, baseline ? &*baseline : nullptr);
  write_text(cfg.out_dir / "report.md", md);
  std::cout << md;
  return kExitOk;
}

std::string column_label(const json& doc, const std::string& fallback) {
  if (doc.contains("backend") && doc["backend"].is_string()) {
    std::string label = doc["backend"].get<std::string>();
    if (doc.contains("scale") && doc["scale"].is_number_integer())
      label += " x" + std::to_string(doc["scale"].get<int>());
    return label;
  }
  if (doc.contains("config") && doc["config"].contains("enhance"))
    return doc["config"]["enhance"].value("backend", fallback) + " x" +
           std::to_string(doc["config"]["enhance"].value("scale", 0));
  return fallback;
}

/// Per-scene MMI aggregate, from either a report.json scene ("mmi", display
/// form) or an mmi.json scene ("aggregate", MMI-<roman> form).
std::map<std::string, std::string> scene_mmi_map(const json& doc) {
  std::map<std::string, std::string> out;
  if (!doc.contains("scenes")) return out;
  for (const json& s : doc["scenes"]) {
    std::string scene = s.value("scene_id", std::string());
    if (scene.empty()) continue;
    json value;
    if (s.contains("aggregate")) value = s["aggregate"];
    else if (s.contains("mmi")) value = s["mmi"];
    out[scene] = value.is_string() ? value.get<std::string>() : "unranked";
  }
  return out;
}

int cmd_compare(const Overrides& o, const std::string& a_path, const std::string& b_path) {
  config::RunConfig cfg = resolve_config(o);
  json a = load_json_file(a_path), b = load_json_file(b_path);
  std::string label_a = column_label(a, "A"), label_b = column_label(b, "B");

  std::ostringstream md;
  md << "# Run Comparison\n\n";
  md << "- A: " << a_path << " (" << label_a << ")\n";
  md << "- B: " << b_path << " (" << label_b << ")\n\n";

  bool compared = false;
  if (a.contains("evaluation") && !a["evaluation"].is_null() && b.contains("evaluation") &&
      !b["evaluation"].is_null()) {
    metrics::EvaluationSummary ea = metrics::summary_from_json(a["evaluation"]);
    metrics::EvaluationSummary eb = metrics::summary_from_json(b["evaluation"]);
    md << "## Per-class metrics\n\n";
    md << "| Damage Type | " << label_a << " P/R/F1 | " << label_b << " P/R/F1 | dF1 |\n";
    md << "|---|---|---|---|\n";
    char buf[160];
    for (std::size_t i = 0; i < ea.per_class.size() && i < eb.per_class.size(); ++i) {
      const auto& ma = ea.per_class[i];
      const auto& mb = eb.per_class[i];
      std::snprintf(buf, sizeof(buf),
                    "| %s | %.3f / %.3f / %.3f | %.3f / %.3f / %.3f | %+.3f |\n",
                    std::string(ma.category.display_name()).c_str(), ma.precision, ma.recall,
                    ma.f1, mb.precision, mb.recall, mb.f1, mb.f1 - ma.f1);
      md << buf;
    }
    std::snprintf(buf, sizeof(buf), "\nOverall accuracy: %.3f vs %.3f\n", ea.overall_accuracy,
                  eb.overall_accuracy);
    md << buf;
    compared = true;
  }

  auto mmi_a = scene_mmi_map(a);
  auto mmi_b = scene_mmi_map(b);
  if (!mmi_a.empty() || !mmi_b.empty()) {
    md << "\n## MMI by scene\n\n";
    md << "| Scene | " << label_a << " | " << label_b << " |\n|---|---|---|\n";
    std::vector<std::string> all_scenes;
    for (const auto& kv : mmi_a) all_scenes.push_back(kv.first);
    for (const auto& kv : mmi_b)
      if (!mmi_a.count(kv.first)) all_scenes.push_back(kv.first);
    std::sort(all_scenes.begin(), all_scenes.end());
    for (const std::string& sc : all_scenes) {
      auto ia = mmi_a.find(sc);
      auto ib = mmi_b.find(sc);
      md << "| " << sc << " | " << (ia != mmi_a.end() ? ia->second : "-") << " | "
         << (ib != mmi_b.end() ? ib->second : "-") << " |\n";
    }
    compared = true;
  }

  if (!compared) throw ingest::SchemaError("inputs carry neither evaluations nor MMI ranks");
  write_text(cfg.out_dir / "compare.md", md.str());
  std::cout << md.str();
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Building damage assessment pipeline"};
  app.require_subcommand(1);

  Overrides o;
  std::string input, image, frames_root, phase = "pre", scene = "scene";
  std::string pre_path, post_path, data_dir, subset, scenes_root, in_path, a_path, b_path;
  std::optional<std::string> baseline_csv;
  bool with_mmi = false;

  CLI::App* sample = app.add_subcommand("sample", "Sample every Nth frame of a video");
  sample->add_option("--input", input, "Video file")->required();
  sample->add_option("--phase", phase, "pre|post")->required();
  sample->add_option("--scene", scene, "Scene id")->required();
  add_common_options(sample, o);

  CLI::App* pseudo = app.add_subcommand("pseudo", "Duplicate a static image into pseudo-frames");
  pseudo->add_option("--image", image, "PNG image")->required();
  pseudo->add_option("--phase", phase, "pre|post")->required();
  pseudo->add_option("--scene", scene, "Scene id")->required();
  add_common_options(pseudo, o);

  CLI::App* enh = app.add_subcommand("enhance", "Enhance an existing frame directory");
  enh->add_option("--frames", frames_root, "Frame directory root")->required();
  enh->add_option("--phase", phase, "pre|post")->required();
  enh->add_option("--scene", scene, "Scene id")->required();
  add_common_options(enh, o);

  CLI::App* assess = app.add_subcommand("assess-scene", "Two-phase scene assessment");
  assess->add_option("--pre", pre_path, "Pre-disaster frames/video/image")->required();
  assess->add_option("--post", post_path, "Post-disaster frames/video/image")->required();
  assess->add_option("--scene", scene, "Scene id")->required();
  assess->add_flag("--mmi", with_mmi, "Also rank MMI intensity");
  add_common_options(assess, o);

  CLI::App* eval = app.add_subcommand("eval-xbd", "Per-building evaluation over an xBD layout");
  eval->add_option("--data", data_dir, "Dataset root (images/ and labels/)")->required();
  eval->add_option("--subset", subset, "Scene id substring filter");
  eval->add_option("--baseline", baseline_csv, "Baseline metrics CSV for comparison");
  add_common_options(eval, o);

  CLI::App* mmi = app.add_subcommand("mmi", "Per-scene MMI ranking with repetitions");
  mmi->add_option("--scenes", scenes_root, "Directory of scene dirs (each with pre/ and post/)")
      ->required();
  add_common_options(mmi, o);

  CLI::App* rep = app.add_subcommand("report", "Re-render a report.json to markdown");
  rep->add_option("--in", in_path, "report.json path")->required();
  rep->add_option("--baseline", baseline_csv, "Baseline metrics CSV");
  add_common_options(rep, o);

  CLI::App* cmp = app.add_subcommand("compare", "Compare two runs (reports or MMI tables)");
  cmp->add_option("--a", a_path, "First report.json / mmi.json")->required();
  cmp->add_option("--b", b_path, "Second report.json / mmi.json")->required();
  add_common_options(cmp, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (sample->parsed()) return cmd_sample(o, input, phase, scene);
    if (pseudo->parsed()) return cmd_pseudo(o, image, phase, scene);
    if (enh->parsed()) return cmd_enhance(o, frames_root, phase, scene);
    if (assess->parsed()) return cmd_assess_scene(o, pre_path, post_path, scene, with_mmi);
    if (eval->parsed()) return cmd_eval_xbd(o, data_dir, subset, baseline_csv);
    if (mmi->parsed()) return cmd_mmi(o, scenes_root);
    if (rep->parsed()) return cmd_report(o, in_path, baseline_csv);
    if (cmp->parsed()) return cmd_compare(o, a_path, b_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return classify_error(e);
  }
  return kExitOk;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("aftermath");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace aftermath::cli
