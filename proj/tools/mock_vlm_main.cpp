// Standalone mock VLM endpoint for manual CLI runs. The unit and acceptance
// tests start the same server in-process instead.

#include <chrono>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "aftermath/ingest.hpp"
#include "aftermath/testkit.hpp"

using namespace aftermath;

namespace {

testkit::MockScript script_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read script file: " + path);
  nlohmann::json doc = nlohmann::json::parse(in);
  testkit::MockScript script;
  for (const auto& [key, value] : doc.items()) {
    if (key == "_default")
      script.default_response = value.get<std::string>();
    else
      script.responses[key] = value.get<std::string>();
  }
  return script;
}

testkit::MockScript script_from_fixture(const std::string& root) {
  namespace fs = std::filesystem;
  const std::string post_suffix = "_post_disaster.json";
  testkit::MockScript script;
  for (const auto& entry : fs::directory_iterator(fs::path(root) / "labels")) {
    std::string name = entry.path().filename().string();
    if (name.size() <= post_suffix.size() ||
        name.compare(name.size() - post_suffix.size(), post_suffix.size(), post_suffix) != 0)
      continue;
    std::string scene = name.substr(0, name.size() - post_suffix.size());
    ingest::XbdSceneFiles files;
    files.label_post = entry.path();
    files.label_pre = fs::path(root) / "labels" / (scene + "_pre_disaster.json");
    files.image_pre = fs::path(root) / "images" / (scene + "_pre_disaster.png");
    files.image_post = fs::path(root) / "images" / (scene + "_post_disaster.png");
    ingest::ScenePair pair = ingest::load_xbd_scene(files, scene, 1);
    testkit::MockScript truthful = testkit::make_truthful_script(pair.buildings);
    script.responses.insert(truthful.responses.begin(), truthful.responses.end());
  }
  return script;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic mock VLM endpoint (/chat)"};
  int port = 8077;
  std::string mode = "scripted", script_file, fixture, default_response;
  app.add_option("--port", port, "Listen port (0 picks a free one)");
  app.add_option("--mode", mode, "scripted|echo|truthful");
  app.add_option("--script", script_file, "JSON map fingerprint -> response (key _default)");
  app.add_option("--fixture", fixture, "xBD-layout root for truthful mode");
  app.add_option("--default", default_response, "Response for unknown prompts");
  CLI11_PARSE(app, argc, argv);

  try {
    testkit::MockScript script;
    if (mode == "truthful") {
      if (fixture.empty()) throw Error("truthful mode needs --fixture");
      script = script_from_fixture(fixture);
    } else if (!script_file.empty()) {
      script = script_from_file(script_file);
    }
    if (!default_response.empty()) script.default_response = default_response;

    testkit::MockVlm mock(std::move(script));
    if (mode == "echo") mock.set_echo_parts(true);
    mock.start(port);
    std::cout << "mock VLM (" << mode << ") listening on " << mock.url() << std::endl;
    for (;;) std::this_thread::sleep_for(std::chrono::seconds(3600));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
