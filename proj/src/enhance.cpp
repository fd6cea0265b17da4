#include "aftermath/enhance.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "aftermath/resample.hpp"

namespace aftermath::enhance {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::service: return "service";
    case Backend::bicubic: return "bicubic";
    case Backend::identity: return "identity";
  }
  return "identity";
}

Backend parse_backend(std::string_view s) {
  if (s == "service") return Backend::service;
  if (s == "bicubic") return Backend::bicubic;
  if (s == "identity") return Backend::identity;
  throw ConfigError("unknown enhancement backend: " + std::string(s));
}

void EnhancementConfig::validate() const {
  if (scale < 1) throw ConfigError("enhancement scale must be >= 1");
  if (window < 1) throw ConfigError("enhancement window must be >= 1");
  if (backend == Backend::service && service_url.empty())
    throw ConfigError("service backend needs a service url");
}

namespace {

EnhancedFrame make_enhanced(const ingest::Frame& source, img::Image image,
                            const EnhancementConfig& cfg) {
  int scale = cfg.effective_scale();
  if (image.width != source.image.width * scale || image.height != source.image.height * scale)
    throw ServiceBadResponse("frame " + std::to_string(source.index) + ": expected " +
                             std::to_string(source.image.width * scale) + "x" +
                             std::to_string(source.image.height * scale) + ", got " +
                             std::to_string(image.width) + "x" + std::to_string(image.height));
  EnhancedFrame out;
  out.frame = source;
  out.frame.image = std::move(image);
  out.provenance = {std::string(backend_name(cfg.backend)), scale, source.source_index};
  return out;
}

std::vector<EnhancedFrame> post_window(std::span<const ingest::Frame> window,
                                       const EnhancementConfig& cfg) {
  json frames = json::array();
  for (const ingest::Frame& f : window)
    frames.push_back(
        {{"index", f.index}, {"png_base64", img::base64_encode(img::encode_png(f.image))}});
  std::string body = json{{"scale", cfg.scale}, {"frames", std::move(frames)}}.dump();

  httplib::Client client(cfg.service_url);
  client.set_connection_timeout(std::chrono::duration<double>(cfg.timeout_s));
  client.set_read_timeout(std::chrono::duration<double>(cfg.timeout_s));
  client.set_write_timeout(std::chrono::duration<double>(cfg.timeout_s));
  httplib::Result res = client.Post("/enhance", body, "application/json");
  if (!res) {
    if (res.error() == httplib::Error::ConnectionTimeout)
      throw Timeout("SR request to " + cfg.service_url + " timed out");
    throw ServiceUnavailable("cannot reach SR service " + cfg.service_url + ": " +
                             httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300)
    throw ServiceUnavailable("SR service returned HTTP " + std::to_string(res->status));

  json doc = json::parse(res->body, nullptr, false);
  if (doc.is_discarded() || !doc.contains("frames") || !doc["frames"].is_array() ||
      doc["frames"].size() != window.size())
    throw ServiceBadResponse("SR response does not carry " + std::to_string(window.size()) +
                             " frames");

  std::vector<EnhancedFrame> out;
  out.reserve(window.size());
  for (std::size_t i = 0; i < window.size(); ++i) {
    const json& entry = doc["frames"][i];
    if (!entry.contains("png_base64"))
      throw ServiceBadResponse("SR response frame missing png_base64");
    img::Image image;
    try {
      image = img::decode_png(img::base64_decode(entry["png_base64"].get<std::string>()));
    } catch (const Error& e) {
      throw ServiceBadResponse(std::string("SR response frame undecodable: ") + e.what());
    }
    out.push_back(make_enhanced(window[i], std::move(image), cfg));
  }
  return out;
}

}  // namespace

std::vector<EnhancedFrame> service_enhance(std::span<const ingest::Frame> window,
                                           const EnhancementConfig& cfg) {
  if (window.empty() || static_cast<int>(window.size()) > cfg.window)
    throw ConfigError("window size must be in [1, " + std::to_string(cfg.window) + "]");
  std::exception_ptr last_error;
  for (int attempt = 0; attempt < 3; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(100 << (attempt - 1)));
    try {
      return post_window(window, cfg);
    } catch (const ServiceBadResponse&) {
      throw;  // deterministic; retrying cannot help
    } catch (const Error&) {
      last_error = std::current_exception();
    }
  }
  std::rethrow_exception(last_error);
}

std::filesystem::path cache_dir(const fs::path& cache_root, const std::string& scene_id,
                                ingest::Phase phase, const EnhancementConfig& cfg) {
  return cache_root / "cache" / scene_id / std::string(ingest::phase_name(phase)) /
         (std::string(backend_name(cfg.backend)) + "-x" + std::to_string(cfg.effective_scale()));
}

namespace {

std::optional<EnhancedFrame> cache_load(const fs::path& dir, const ingest::Frame& source,
                                        const EnhancementConfig& cfg) {
  fs::path file = dir / ingest::frame_file_name(source.index);
  if (!fs::exists(file)) return std::nullopt;
  try {
    return make_enhanced(source, img::read_png(file), cfg);
  } catch (const Error&) {
    return std::nullopt;  // stale or truncated entry: recompute
  }
}

void cache_store(const fs::path& dir, const EnhancedFrame& ef) {
  fs::create_directories(dir);
  // write-then-rename so concurrent readers never see a partial file
  fs::path final_path = dir / ingest::frame_file_name(ef.frame.index);
  fs::path tmp = final_path;
  tmp += ".tmp";
  img::write_png(tmp, ef.frame.image);
  fs::rename(tmp, final_path);
}

img::Image local_upscale(const img::Image& image, const EnhancementConfig& cfg) {
  if (cfg.backend == Backend::identity) return image;
  return img::bicubic_upscale(image, cfg.scale);
}

}  // namespace

std::vector<EnhancedFrame> enhance_sequence(const ingest::FrameSequence& seq,
                                            const EnhancementConfig& cfg,
                                            const std::optional<fs::path>& cache_root) {
  cfg.validate();
  seq.validate();
  if (seq.frames.empty()) throw ingest::EmptyStream("nothing to enhance");

  std::optional<fs::path> dir;
  if (cache_root) dir = cache_dir(*cache_root, seq.scene_id, seq.phase, cfg);

  std::vector<EnhancedFrame> out(seq.frames.size());
  std::vector<const ingest::Frame*> misses;
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    if (dir) {
      if (auto hit = cache_load(*dir, seq.frames[i], cfg)) {
        out[i] = std::move(*hit);
        continue;
      }
    }
    misses.push_back(&seq.frames[i]);
  }

  if (cfg.backend == Backend::service) {
    // windows of cfg.window frames, in order; a miss window carries
    // contiguous source frames so temporal enhancers see real neighborhoods
    std::vector<ingest::Frame> chunk;
    auto flush = [&] {
      if (chunk.empty()) return;
      for (EnhancedFrame& ef : service_enhance(chunk, cfg)) {
        std::size_t slot = static_cast<std::size_t>(ef.frame.index);
        if (dir) cache_store(*dir, ef);
        out[slot] = std::move(ef);
      }
      chunk.clear();
    };
    for (const ingest::Frame* f : misses) {
      chunk.push_back(*f);
      if (static_cast<int>(chunk.size()) == cfg.window) flush();
    }
    flush();
  } else {
    for (const ingest::Frame* f : misses) {
      EnhancedFrame ef = make_enhanced(*f, local_upscale(f->image, cfg), cfg);
      if (dir) cache_store(*dir, ef);
      out[static_cast<std::size_t>(f->index)] = std::move(ef);
    }
  }
  return out;
}

}  // namespace aftermath::enhance
