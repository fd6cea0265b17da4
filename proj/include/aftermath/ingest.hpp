#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aftermath/errors.hpp"
#include "aftermath/image.hpp"
#include "aftermath/taxonomy.hpp"

namespace aftermath::ingest {

struct DecodeFailure : Error {
  using Error::Error;
};
struct EmptyStream : Error {
  using Error::Error;
};
struct SchemaError : Error {
  using Error::Error;
};
struct GeometryError : Error {
  using Error::Error;
};
struct DegeneratePolygon : Error {
  using Error::Error;
};

enum class Phase { pre, post };
std::string_view phase_name(Phase p);
Phase parse_phase(std::string_view s);  // "pre" | "post"

struct Frame {
  int index = 0;           // position in the sampled sequence
  int source_index = 0;    // position in the original stream
  double timestamp_s = 0;  // source_index / source_fps
  img::Image image;

  int width() const { return image.width; }
  int height() const { return image.height; }
};

/// Ordered frames from one scene and phase. Immutable after construction by
/// convention; validate() checks the stride/size invariants.
struct FrameSequence {
  std::string scene_id;
  Phase phase = Phase::pre;
  double source_fps = 1.0;
  int stride = 1;
  std::vector<Frame> frames;

  double effective_fps() const { return source_fps / stride; }
  void validate() const;
};

struct BuildingRecord {
  std::string building_id;
  std::vector<std::pair<double, double>> polygon;  // pixel xy, >= 3 vertices
  std::optional<taxonomy::XbdLabel> truth_label;
  bool missing_counterpart = false;  // present in only one label file
};

struct ScenePair {
  std::string scene_id;
  FrameSequence pre;
  FrameSequence post;
  std::vector<BuildingRecord> buildings;
};

/// Sequential source of decoded rasters. next() returns nullopt at
/// end-of-stream and throws DecodeFailure on corrupt data.
class FrameStream {
 public:
  virtual ~FrameStream() = default;
  virtual double fps() const = 0;
  virtual std::optional<img::Image> next() = 0;
};

class MemoryFrameStream : public FrameStream {
 public:
  MemoryFrameStream(std::vector<img::Image> frames, double fps)
      : frames_(std::move(frames)), fps_(fps) {}
  double fps() const override { return fps_; }
  std::optional<img::Image> next() override;

 private:
  std::vector<img::Image> frames_;
  double fps_;
  std::size_t pos_ = 0;
};

/// Reads a frame_<index:06>.png directory in filename order.
class PngDirStream : public FrameStream {
 public:
  PngDirStream(const std::filesystem::path& dir, double fps);
  double fps() const override { return fps_; }
  std::optional<img::Image> next() override;

 private:
  std::vector<std::filesystem::path> files_;
  double fps_;
  std::size_t pos_ = 0;
};

/// Opens a video file by spawning the external decoder (ffmpeg/ffprobe, or
/// the commands named by AFTERMATH_FFMPEG / AFTERMATH_FFPROBE) and reading
/// raw RGB frames over a pipe.
std::unique_ptr<FrameStream> open_video(const std::filesystem::path& path,
                                        std::optional<double> fps_override);

/// Keeps frames at source indices 0, stride, 2*stride, ...; the sampled count
/// is ceil(N / stride) for an N-frame stream.
FrameSequence sample_frames(FrameStream& stream, int stride, Phase phase, std::string scene_id);

/// count byte-identical copies of one raster, stride 1, so video-oriented
/// enhancement backends can run on static imagery.
FrameSequence make_pseudo_frames(const img::Image& image, int count, Phase phase,
                                 std::string scene_id);

struct XbdSceneFiles {
  std::filesystem::path label_pre;
  std::filesystem::path label_post;
  std::filesystem::path image_pre;
  std::filesystem::path image_post;
};

/// Loads an xBD-style labeled pair into pseudo-frame sequences plus building
/// records. Truth labels come from the post-disaster file; buildings present
/// in only one file are kept with missing_counterpart set.
ScenePair load_xbd_scene(const XbdSceneFiles& files, const std::string& scene_id,
                         int pseudo_count);

/// Axis-aligned bounding box of the polygon, expanded by pad_fraction of the
/// box span per side and clamped to the frame.
Frame crop_building(const Frame& frame, const BuildingRecord& building, double pad_fraction);

/// Polygon coordinates multiplied by an integer factor, for cropping from
/// enhanced frames.
BuildingRecord scale_building(const BuildingRecord& building, int scale);

// Frame directory layout: <root>/<scene_id>/<phase>/frame_<index:06>.png
std::filesystem::path frame_file_name(int index);
void write_frame_dir(const std::filesystem::path& root, const FrameSequence& seq);
FrameSequence read_frame_dir(const std::filesystem::path& dir, Phase phase, std::string scene_id,
                             double fps);

// Exposed for the loader and the fixture generator.
std::vector<std::pair<double, double>> parse_wkt_polygon(const std::string& wkt);
std::string format_wkt_polygon(const std::vector<std::pair<double, double>>& polygon);

}  // namespace aftermath::ingest
