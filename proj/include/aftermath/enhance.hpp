#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aftermath/errors.hpp"
#include "aftermath/ingest.hpp"

namespace aftermath::enhance {

struct ServiceUnavailable : Error {
  using Error::Error;
};
struct ServiceBadResponse : Error {
  using Error::Error;
};
struct Timeout : Error {
  using Error::Error;
};

enum class Backend { service, bicubic, identity };
std::string_view backend_name(Backend b);
Backend parse_backend(std::string_view s);

struct EnhancementConfig {
  Backend backend = Backend::bicubic;
  int scale = 4;
  std::string service_url;  // required for the service backend
  double timeout_s = 300.0;
  int window = 5;  // frames per service request

  void validate() const;
  // identity ignores the configured scale and behaves as scale 1
  int effective_scale() const { return backend == Backend::identity ? 1 : scale; }
};

struct Provenance {
  std::string backend;
  int scale = 1;
  int source_index = 0;
};

struct EnhancedFrame {
  ingest::Frame frame;
  Provenance provenance;
};

/// Enhances every frame of one sequence, order preserved. Pre and post
/// sequences must be enhanced by separate calls; a sequence carries only one
/// phase by construction, which is what keeps the streams isolated.
/// With cache_root set, frames found under
/// cache/<scene>/<phase>/<backend>-x<scale>/ are reused and misses are
/// written back.
std::vector<EnhancedFrame> enhance_sequence(
    const ingest::FrameSequence& seq, const EnhancementConfig& cfg,
    const std::optional<std::filesystem::path>& cache_root = std::nullopt);

/// One window POSTed to the SR service. Retries transport failures twice with
/// exponential backoff; dimension mismatches fail immediately.
std::vector<EnhancedFrame> service_enhance(std::span<const ingest::Frame> window,
                                           const EnhancementConfig& cfg);

std::filesystem::path cache_dir(const std::filesystem::path& cache_root,
                                const std::string& scene_id, ingest::Phase phase,
                                const EnhancementConfig& cfg);

}  // namespace aftermath::enhance
