#include "aftermath/testkit.hpp"

#include <cmath>
#include <fstream>

#include <httplib.h>
#include <json.hpp>

#include "aftermath/image.hpp"
#include "aftermath/resample.hpp"

namespace aftermath::testkit {

using nlohmann::json;
namespace fs = std::filesystem;

const std::string& MockScript::lookup(const std::string& prompt_text) const {
  const std::string* best = nullptr;
  std::size_t best_len = 0;
  for (const auto& [fingerprint, response] : responses) {
    if (fingerprint.size() < best_len) continue;  // map order breaks ties low
    if (prompt_text.find(fingerprint) == std::string::npos) continue;
    if (fingerprint.size() > best_len) {
      best = &response;
      best_len = fingerprint.size();
    }
  }
  return best ? *best : default_response;
}

std::string truthful_response(const std::string& building_id, taxonomy::DamageCategory category) {
  json block{{"structures",
              json::array({{{"id", building_id},
                            {"category", category.level()},
                            {"rationale", "fixture truth"},
                            {"confidence", "high"}}})}};
  return "```json\n" + block.dump() + "\n```";
}

MockScript make_truthful_script(const std::vector<ingest::BuildingRecord>& buildings) {
  MockScript script;
  for (const ingest::BuildingRecord& b : buildings) {
    if (!b.truth_label) continue;
    auto category = taxonomy::map_xbd_to_category(*b.truth_label);
    if (!category) continue;  // un-classified: fall through to the default
    script.responses[b.building_id] = truthful_response(b.building_id, *category);
  }
  return script;
}

namespace {

int start_server(httplib::Server& server, std::thread& thread, int port) {
  int bound = port;
  if (port == 0) {
    bound = server.bind_to_any_port("127.0.0.1");
    if (bound <= 0) throw PortInUse("could not bind any port");
  } else if (!server.bind_to_port("127.0.0.1", port)) {
    throw PortInUse("port " + std::to_string(port) + " is in use");
  }
  thread = std::thread([&server] { server.listen_after_bind(); });
  server.wait_until_ready();
  return bound;
}

void stop_server(httplib::Server* server, std::thread& thread) {
  if (!server) return;
  server->stop();
  if (thread.joinable()) thread.join();
}

std::string concat_text_parts(const json& request) {
  std::string text;
  if (!request.contains("messages") || !request["messages"].is_array()) return text;
  for (const json& m : request["messages"])
    if (m.contains("parts") && m["parts"].is_array())
      for (const json& p : m["parts"])
        if (p.contains("text") && p["text"].is_string()) {
          text += p["text"].get<std::string>();
          text += "\n";
        }
  return text;
}

}  // namespace

MockVlm::MockVlm(MockScript script) : script_(std::move(script)) {}

MockVlm::~MockVlm() { stop(); }

int MockVlm::start(int port) {
  server_ = std::make_unique<httplib::Server>();
  server_->Post("/chat", [this](const httplib::Request& req, httplib::Response& res) {
    ++request_count_;
    json request = json::parse(req.body, nullptr, false);
    if (request.is_discarded() || !request.contains("messages")) {
      res.status = 400;
      res.set_content(json{{"error", "bad request"}}.dump(), "application/json");
      return;
    }
    std::string reply;
    if (echo_parts_) {
      const json& messages = request["messages"];
      std::size_t parts =
          messages.empty() ? 0 : messages.back().value("parts", json::array()).size();
      reply = "parts=" + std::to_string(parts);
    } else {
      reply = script_.lookup(concat_text_parts(request));
    }
    res.set_content(json{{"text", reply}}.dump(), "application/json");
  });
  port_ = start_server(*server_, thread_, port);
  return port_;
}

void MockVlm::stop() {
  stop_server(server_.get(), thread_);
  server_.reset();
}

std::string MockVlm::url() const { return "http://127.0.0.1:" + std::to_string(port_); }

MockSr::MockSr(SrMode mode) : mode_(mode) {}

MockSr::~MockSr() { stop(); }

int MockSr::start(int port) {
  server_ = std::make_unique<httplib::Server>();
  server_->Post("/enhance", [this](const httplib::Request& req, httplib::Response& res) {
    ++request_count_;
    json request = json::parse(req.body, nullptr, false);
    if (request.is_discarded() || !request.contains("frames") || !request.contains("scale")) {
      res.status = 400;
      res.set_content(json{{"error", "bad request"}}.dump(), "application/json");
      return;
    }
    int scale = request["scale"].get<int>();
    json frames = json::array();
    try {
      for (const json& f : request["frames"]) {
        img::Image in = img::decode_png(img::base64_decode(f["png_base64"].get<std::string>()));
        img::Image out = mode_ == SrMode::nearest ? img::nearest_upscale(in, scale) : in;
        frames.push_back({{"index", f.value("index", 0)},
                          {"png_base64", img::base64_encode(img::encode_png(out))}});
      }
    } catch (const Error&) {
      res.status = 400;
      res.set_content(json{{"error", "undecodable frame"}}.dump(), "application/json");
      return;
    }
    res.set_content(json{{"frames", std::move(frames)}}.dump(), "application/json");
  });
  port_ = start_server(*server_, thread_, port);
  return port_;
}

void MockSr::stop() {
  stop_server(server_.get(), thread_);
  server_.reset();
}

std::string MockSr::url() const { return "http://127.0.0.1:" + std::to_string(port_); }

namespace {

struct Box {
  int x0, y0, x1, y1;  // inclusive
};

void fill_box(img::Image& im, const Box& b, std::uint8_t r, std::uint8_t g, std::uint8_t bl) {
  for (int y = b.y0; y <= b.y1; ++y)
    for (int x = b.x0; x <= b.x1; ++x) {
      std::uint8_t* p = im.pixel(x, y);
      p[0] = r;
      p[1] = g;
      p[2] = bl;
    }
}

void write_json_file(const fs::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  out << doc.dump(2) << "\n";
}

}  // namespace

ingest::XbdSceneFiles gen_fixture_scene(const fs::path& root, const std::string& scene_id,
                                        const std::vector<taxonomy::XbdLabel>& labels) {
  const int box = 20, margin = 8;
  int n = static_cast<int>(labels.size());
  int cols = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)))));
  int rows = n == 0 ? 1 : (n + cols - 1) / cols;
  int width = margin + cols * (box + margin);
  int height = margin + rows * (box + margin);

  img::Image pre = img::solid_image(width, height, 96, 112, 80);  // muted ground
  img::Image post = pre;

  json features_pre = json::array();
  json features_post = json::array();
  std::vector<ingest::BuildingRecord> records;

  for (int i = 0; i < n; ++i) {
    int cx = margin + (i % cols) * (box + margin);
    int cy = margin + (i / cols) * (box + margin);
    Box b{cx, cy, cx + box - 1, cy + box - 1};
    fill_box(pre, b, 200, 200, 190);  // intact roof

    switch (labels[static_cast<std::size_t>(i)]) {
      case taxonomy::XbdLabel::NoDamage: fill_box(post, b, 200, 200, 190); break;
      case taxonomy::XbdLabel::MinorDamage: fill_box(post, b, 180, 170, 140); break;
      case taxonomy::XbdLabel::MajorDamage: fill_box(post, b, 150, 110, 70); break;
      case taxonomy::XbdLabel::Destroyed: fill_box(post, b, 90, 70, 60); break;
      case taxonomy::XbdLabel::Unclassified: fill_box(post, b, 128, 128, 128); break;
    }

    char uid[64];
    std::snprintf(uid, sizeof(uid), "%s_b%03d", scene_id.c_str(), i);
    std::vector<std::pair<double, double>> polygon{
        {static_cast<double>(b.x0), static_cast<double>(b.y0)},
        {static_cast<double>(b.x1 + 1), static_cast<double>(b.y0)},
        {static_cast<double>(b.x1 + 1), static_cast<double>(b.y1 + 1)},
        {static_cast<double>(b.x0), static_cast<double>(b.y1 + 1)}};
    std::string wkt = ingest::format_wkt_polygon(polygon);

    features_pre.push_back({{"wkt", wkt}, {"properties", {{"uid", uid}}}});
    features_post.push_back(
        {{"wkt", wkt},
         {"properties",
          {{"uid", uid},
           {"subtype", std::string(taxonomy::xbd_label_name(labels[static_cast<std::size_t>(i)]))}}}});
  }

  fs::create_directories(root / "images");
  fs::create_directories(root / "labels");

  ingest::XbdSceneFiles files;
  files.image_pre = root / "images" / (scene_id + "_pre_disaster.png");
  files.image_post = root / "images" / (scene_id + "_post_disaster.png");
  files.label_pre = root / "labels" / (scene_id + "_pre_disaster.json");
  files.label_post = root / "labels" / (scene_id + "_post_disaster.json");

  img::write_png(files.image_pre, pre);
  img::write_png(files.image_post, post);
  json metadata{{"width", width}, {"height", height}};
  write_json_file(files.label_pre,
                  json{{"features", {{"xy", features_pre}}}, {"metadata", metadata}});
  write_json_file(files.label_post,
                  json{{"features", {{"xy", features_post}}}, {"metadata", metadata}});
  return files;
}

}  // namespace aftermath::testkit
