#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "aftermath/errors.hpp"
#include "aftermath/ingest.hpp"
#include "aftermath/taxonomy.hpp"

namespace httplib {
class Server;
}

namespace aftermath::testkit {

struct PortInUse : Error {
  using Error::Error;
};

/// Canned VLM responses keyed by fingerprints found in the prompt text
/// (scene or building ids). Longest matching fingerprint wins; ties break
/// lexicographically, so lookup is deterministic.
struct MockScript {
  std::map<std::string, std::string> responses;
  std::string default_response = "No structured answer.";

  const std::string& lookup(const std::string& prompt_text) const;
};

/// Schema-conformant answer for one building with a known truth label, as the
/// truthful mock emits it.
std::string truthful_response(const std::string& building_id, taxonomy::DamageCategory category);

/// Script answering every building id with its fixture truth. Buildings with
/// an un-classified truth get the default response (the client then records
/// them unscored).
MockScript make_truthful_script(const std::vector<ingest::BuildingRecord>& buildings);

/// In-process mock VLM speaking the /chat wire protocol. Start with port 0 to
/// bind any free port.
class MockVlm {
 public:
  explicit MockVlm(MockScript script);
  ~MockVlm();

  /// Echo mode answers "parts=<n>" for the last message instead of consulting
  /// the script.
  void set_echo_parts(bool on) { echo_parts_ = on; }

  int start(int port = 0);  // returns the bound port; throws PortInUse
  void stop();
  std::string url() const;
  int request_count() const { return request_count_.load(); }

 private:
  MockScript script_;
  bool echo_parts_ = false;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> request_count_{0};
};

enum class SrMode { nearest, identity };

/// In-process mock SR service speaking the /enhance wire protocol. nearest
/// mode upscales by block replication at the requested scale; identity mode
/// returns frames unchanged (wrong-sized on purpose when scale > 1, which is
/// how client-side dimension checks get exercised).
class MockSr {
 public:
  explicit MockSr(SrMode mode);
  ~MockSr();

  int start(int port = 0);
  void stop();
  std::string url() const;
  int request_count() const { return request_count_.load(); }

 private:
  SrMode mode_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> request_count_{0};
};

/// Synthetic xBD-layout scene under root: images/<scene>_{pre,post}_disaster.png
/// and labels/<scene>_{pre,post}_disaster.json. Buildings are colored
/// rectangles on a grid; damaged ones change appearance in the post image.
/// Returns the file set for load_xbd_scene.
ingest::XbdSceneFiles gen_fixture_scene(const std::filesystem::path& root,
                                        const std::string& scene_id,
                                        const std::vector<taxonomy::XbdLabel>& labels);

}  // namespace aftermath::testkit
