#include "aftermath/ingest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace aftermath::ingest {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view phase_name(Phase p) { return p == Phase::pre ? "pre" : "post"; }

Phase parse_phase(std::string_view s) {
  if (s == "pre") return Phase::pre;
  if (s == "post") return Phase::post;
  throw SchemaError("unknown phase: " + std::string(s));
}

void FrameSequence::validate() const {
  if (scene_id.empty()) throw SchemaError("frame sequence has no scene id");
  if (stride < 1) throw SchemaError("stride must be >= 1");
  if (source_fps <= 0) throw SchemaError("source fps must be positive");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Frame& f = frames[i];
    if (f.index != static_cast<int>(i))
      throw SchemaError("frame indices must be contiguous from 0");
    if (f.image.width <= 0 || f.image.height <= 0)
      throw SchemaError("frame " + std::to_string(i) + " has no pixels");
    if (f.image.width != frames[0].image.width || f.image.height != frames[0].image.height)
      throw SchemaError("frame dimensions vary within a sequence");
  }
}

std::optional<img::Image> MemoryFrameStream::next() {
  if (pos_ >= frames_.size()) return std::nullopt;
  return frames_[pos_++];
}

PngDirStream::PngDirStream(const fs::path& dir, double fps) : fps_(fps) {
  if (!fs::is_directory(dir)) throw DecodeFailure("not a frame directory: " + dir.string());
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".png") files_.push_back(entry.path());
  }
  std::sort(files_.begin(), files_.end());
}

std::optional<img::Image> PngDirStream::next() {
  if (pos_ >= files_.size()) return std::nullopt;
  try {
    return img::read_png(files_[pos_++]);
  } catch (const img::ImageDecodeFailure& e) {
    throw DecodeFailure(e.what());
  }
}

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  out += "'";
  return out;
}

std::string tool_name(const char* env_var, const char* fallback) {
  if (const char* v = std::getenv(env_var); v && *v) return v;
  return fallback;
}

// Raw RGB24 frames piped from the external decoder.
class VideoStream : public FrameStream {
 public:
  VideoStream(const fs::path& path, std::optional<double> fps_override) {
    probe(path, fps_override);
    std::string cmd = tool_name("AFTERMATH_FFMPEG", "ffmpeg") + std::string(" -v error -i ") +
                      shell_quote(path.string()) + " -f rawvideo -pix_fmt rgb24 - 2>/dev/null";
    pipe_ = popen(cmd.c_str(), "r");
    if (!pipe_) throw DecodeFailure("failed to start decoder for " + path.string());
  }

  ~VideoStream() override {
    if (pipe_) pclose(pipe_);
  }

  double fps() const override { return fps_; }

  std::optional<img::Image> next() override {
    img::Image frame = img::solid_image(width_, height_, 0, 0, 0);
    std::size_t want = frame.rgb.size();
    std::size_t got = fread(frame.rgb.data(), 1, want, pipe_);
    if (got == 0) return std::nullopt;
    if (got != want) throw DecodeFailure("truncated frame from decoder");
    return frame;
  }

 private:
  void probe(const fs::path& path, std::optional<double> fps_override) {
    std::string cmd = tool_name("AFTERMATH_FFPROBE", "ffprobe") +
                      std::string(" -v error -select_streams v:0 -show_entries "
                                  "stream=width,height,r_frame_rate -of csv=p=0 ") +
                      shell_quote(path.string()) + " 2>/dev/null";
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) throw DecodeFailure("failed to probe " + path.string());
    std::array<char, 256> buf{};
    std::string line;
    if (fgets(buf.data(), buf.size(), p)) line = buf.data();
    pclose(p);

    int num = 0, den = 1;
    if (std::sscanf(line.c_str(), "%d,%d,%d/%d", &width_, &height_, &num, &den) < 3 ||
        width_ <= 0 || height_ <= 0)
      throw DecodeFailure("could not probe dimensions of " + path.string());
    if (fps_override)
      fps_ = *fps_override;
    else if (num > 0 && den > 0)
      fps_ = static_cast<double>(num) / den;
    else
      fps_ = 25.0;
  }

  FILE* pipe_ = nullptr;
  int width_ = 0;
  int height_ = 0;
  double fps_ = 25.0;
};

}  // namespace

std::unique_ptr<FrameStream> open_video(const fs::path& path, std::optional<double> fps_override) {
  if (!fs::exists(path)) throw DecodeFailure("no such video: " + path.string());
  return std::make_unique<VideoStream>(path, fps_override);
}

FrameSequence sample_frames(FrameStream& stream, int stride, Phase phase, std::string scene_id) {
  if (stride < 1) throw SchemaError("stride must be >= 1");
  FrameSequence seq;
  seq.scene_id = std::move(scene_id);
  seq.phase = phase;
  seq.source_fps = stream.fps();
  seq.stride = stride;

  int source_index = 0;
  while (auto image = stream.next()) {
    if (source_index % stride == 0) {
      Frame f;
      f.index = static_cast<int>(seq.frames.size());
      f.source_index = source_index;
      f.timestamp_s = source_index / seq.source_fps;
      f.image = std::move(*image);
      seq.frames.push_back(std::move(f));
    }
    ++source_index;
  }
  if (seq.frames.empty()) throw EmptyStream("stream produced no frames");
  seq.validate();
  return seq;
}

FrameSequence make_pseudo_frames(const img::Image& image, int count, Phase phase,
                                 std::string scene_id) {
  if (count < 1) throw SchemaError("pseudo frame count must be >= 1");
  if (image.width <= 0 || image.height <= 0) throw EmptyStream("pseudo source has no pixels");
  FrameSequence seq;
  seq.scene_id = std::move(scene_id);
  seq.phase = phase;
  seq.source_fps = 1.0;
  seq.stride = 1;
  for (int i = 0; i < count; ++i) {
    Frame f;
    f.index = i;
    f.source_index = i;
    f.timestamp_s = static_cast<double>(i);
    f.image = image;
    seq.frames.push_back(std::move(f));
  }
  seq.validate();
  return seq;
}

std::vector<std::pair<double, double>> parse_wkt_polygon(const std::string& wkt) {
  // Accepts the xBD form: POLYGON ((x y, x y, ...)). Only the outer ring is
  // read; interior rings are not present in this dataset.
  std::size_t tag = wkt.find("POLYGON");
  if (tag == std::string::npos) throw SchemaError("not a WKT polygon: " + wkt);
  std::size_t open = wkt.find("((", tag);
  std::size_t close = wkt.find(')', open == std::string::npos ? 0 : open + 2);
  if (open == std::string::npos || close == std::string::npos)
    throw SchemaError("malformed WKT polygon: " + wkt);

  std::vector<std::pair<double, double>> ring;
  std::stringstream body(wkt.substr(open + 2, close - open - 2));
  std::string pair_text;
  while (std::getline(body, pair_text, ',')) {
    std::stringstream ps(pair_text);
    double x = 0, y = 0;
    if (!(ps >> x >> y)) throw SchemaError("malformed WKT coordinate: " + pair_text);
    ring.emplace_back(x, y);
  }
  // WKT closes the ring by repeating the first vertex; drop the duplicate.
  if (ring.size() >= 2 && ring.front() == ring.back()) ring.pop_back();
  if (ring.size() < 3) throw SchemaError("polygon needs at least 3 vertices: " + wkt);
  return ring;
}

std::string format_wkt_polygon(const std::vector<std::pair<double, double>>& polygon) {
  std::ostringstream out;
  out << "POLYGON ((";
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    if (i) out << ", ";
    out << polygon[i].first << " " << polygon[i].second;
  }
  // repeat the first vertex to close the ring
  if (!polygon.empty()) out << ", " << polygon[0].first << " " << polygon[0].second;
  out << "))";
  return out.str();
}

namespace {

struct LabelFile {
  int width = 0;
  int height = 0;
  // uid -> (polygon, subtype or empty)
  std::map<std::string, std::pair<std::vector<std::pair<double, double>>, std::string>> buildings;
};

LabelFile load_label_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open label file: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError("label file " + path.string() + ": " + e.what());
  }

  LabelFile out;
  if (!doc.contains("metadata") || !doc["metadata"].contains("width") ||
      !doc["metadata"].contains("height"))
    throw SchemaError("label file missing metadata dimensions: " + path.string());
  out.width = doc["metadata"]["width"].get<int>();
  out.height = doc["metadata"]["height"].get<int>();
  if (out.width <= 0 || out.height <= 0)
    throw SchemaError("label file has non-positive dimensions: " + path.string());

  if (!doc.contains("features") || !doc["features"].contains("xy"))
    throw SchemaError("label file missing features.xy: " + path.string());
  for (const auto& feature : doc["features"]["xy"]) {
    if (!feature.contains("wkt") || !feature.contains("properties") ||
        !feature["properties"].contains("uid"))
      throw SchemaError("feature missing wkt or uid in " + path.string());
    std::string uid = feature["properties"]["uid"].get<std::string>();
    auto polygon = parse_wkt_polygon(feature["wkt"].get<std::string>());
    std::string subtype;
    if (feature["properties"].contains("subtype"))
      subtype = feature["properties"]["subtype"].get<std::string>();
    if (!out.buildings.emplace(uid, std::make_pair(std::move(polygon), std::move(subtype)))
             .second)
      throw SchemaError("duplicate uid " + uid + " in " + path.string());
  }
  return out;
}

void check_bounds(const BuildingRecord& b, int width, int height) {
  for (auto [x, y] : b.polygon) {
    if (x < 0 || x > width || y < 0 || y > height)
      throw GeometryError("building " + b.building_id + " vertex (" + std::to_string(x) + ", " +
                          std::to_string(y) + ") outside " + std::to_string(width) + "x" +
                          std::to_string(height) + " frame");
  }
}

}  // namespace

ScenePair load_xbd_scene(const XbdSceneFiles& files, const std::string& scene_id,
                         int pseudo_count) {
  LabelFile pre = load_label_file(files.label_pre);
  LabelFile post = load_label_file(files.label_post);

  img::Image pre_img = img::read_png(files.image_pre);
  img::Image post_img = img::read_png(files.image_post);
  if (pre_img.width != pre.width || pre_img.height != pre.height)
    throw SchemaError("pre image does not match label metadata for " + scene_id);
  if (post_img.width != post.width || post_img.height != post.height)
    throw SchemaError("post image does not match label metadata for " + scene_id);

  ScenePair scene;
  scene.scene_id = scene_id;
  scene.pre = make_pseudo_frames(pre_img, pseudo_count, Phase::pre, scene_id);
  scene.post = make_pseudo_frames(post_img, pseudo_count, Phase::post, scene_id);

  // Post-disaster polygons and subtypes are authoritative; the pre file only
  // confirms the footprint existed before the event.
  for (const auto& [uid, entry] : post.buildings) {
    BuildingRecord b;
    b.building_id = uid;
    b.polygon = entry.first;
    if (!entry.second.empty()) b.truth_label = taxonomy::parse_xbd_label(entry.second);
    b.missing_counterpart = !pre.buildings.count(uid);
    check_bounds(b, post.width, post.height);
    scene.buildings.push_back(std::move(b));
  }
  for (const auto& [uid, entry] : pre.buildings) {
    if (post.buildings.count(uid)) continue;
    BuildingRecord b;
    b.building_id = uid;
    b.polygon = entry.first;
    b.missing_counterpart = true;
    check_bounds(b, pre.width, pre.height);
    scene.buildings.push_back(std::move(b));
  }
  return scene;
}

Frame crop_building(const Frame& frame, const BuildingRecord& building, double pad_fraction) {
  if (building.polygon.size() < 3)
    throw DegeneratePolygon("building " + building.building_id + " has too few vertices");
  double min_x = building.polygon[0].first, max_x = min_x;
  double min_y = building.polygon[0].second, max_y = min_y;
  for (auto [x, y] : building.polygon) {
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
  }
  if (max_x <= min_x || max_y <= min_y)
    throw DegeneratePolygon("building " + building.building_id + " has a zero-area bounding box");

  // Pad by a fraction of each span, rounded to pixels, then clamp.
  int pad_x = static_cast<int>(std::lround(pad_fraction * (max_x - min_x)));
  int pad_y = static_cast<int>(std::lround(pad_fraction * (max_y - min_y)));
  int x0 = std::clamp(static_cast<int>(std::floor(min_x)) - pad_x, 0, frame.image.width - 1);
  int y0 = std::clamp(static_cast<int>(std::floor(min_y)) - pad_y, 0, frame.image.height - 1);
  int x1 = std::clamp(static_cast<int>(std::ceil(max_x)) + pad_x, 0, frame.image.width - 1);
  int y1 = std::clamp(static_cast<int>(std::ceil(max_y)) + pad_y, 0, frame.image.height - 1);

  Frame out;
  out.index = frame.index;
  out.source_index = frame.source_index;
  out.timestamp_s = frame.timestamp_s;
  out.image = img::Image{x1 - x0 + 1, y1 - y0 + 1, {}};
  out.image.rgb.resize(static_cast<std::size_t>(out.image.width) * out.image.height * 3);
  for (int y = y0; y <= y1; ++y) {
    const uint8_t* src = frame.image.pixel(x0, y);
    uint8_t* dst = out.image.pixel(0, y - y0);
    std::copy(src, src + static_cast<std::size_t>(out.image.width) * 3, dst);
  }
  return out;
}

BuildingRecord scale_building(const BuildingRecord& building, int scale) {
  if (scale < 1) throw SchemaError("scale must be >= 1");
  BuildingRecord out = building;
  for (auto& [x, y] : out.polygon) {
    x *= scale;
    y *= scale;
  }
  return out;
}

std::filesystem::path frame_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06d.png", index);
  return buf;
}

void write_frame_dir(const fs::path& root, const FrameSequence& seq) {
  seq.validate();
  fs::path dir = root / seq.scene_id / std::string(phase_name(seq.phase));
  fs::create_directories(dir);
  for (const Frame& f : seq.frames) img::write_png(dir / frame_file_name(f.index), f.image);
}

FrameSequence read_frame_dir(const fs::path& dir, Phase phase, std::string scene_id, double fps) {
  PngDirStream stream(dir, fps);
  return sample_frames(stream, 1, phase, std::move(scene_id));
}

}  // namespace aftermath::ingest
