#include "aftermath/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace aftermath::config {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(const std::string& value, int line_no) {
  if (value.size() < 2 || value.back() != '"')
    throw ConfigError("unterminated string on line " + std::to_string(line_no));
  std::string out;
  for (std::size_t i = 1; i + 1 < value.size(); ++i) {
    if (value[i] == '\\' && i + 2 < value.size()) {
      ++i;
      switch (value[i]) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default:
          throw ConfigError("unknown escape on line " + std::to_string(line_no));
      }
    } else {
      out += value[i];
    }
  }
  return out;
}

std::string quote(const std::string& value) {
  std::string out = "\"";
  for (char c : value) {
    switch (c) {
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

/// %.17g round-trips doubles exactly; integral values keep a ".0" marker so
/// they re-parse as written.
std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eEnN") == std::string::npos) s += ".0";
  return s;
}

class Section {
 public:
  Section(const std::map<std::string, std::map<std::string, std::string>>& doc, std::string name)
      : section_(nullptr), name_(std::move(name)) {
    auto it = doc.find(name_);
    if (it != doc.end()) section_ = &it->second;
  }

  std::optional<std::string> raw(const std::string& key) const {
    if (!section_) return std::nullopt;
    auto it = section_->find(key);
    if (it == section_->end()) return std::nullopt;
    return it->second;
  }

  void get(const std::string& key, std::string& out) const {
    if (auto v = raw(key)) {
      if (v->size() >= 1 && (*v)[0] == '"')
        out = unquote(*v, 0);
      else
        out = *v;
    }
  }

  void get(const std::string& key, int& out) const {
    if (auto v = raw(key)) {
      try {
        out = std::stoi(*v);
      } catch (const std::exception&) {
        throw ConfigError(name_ + "." + key + " is not an integer: " + *v);
      }
    }
  }

  void get(const std::string& key, std::int64_t& out) const {
    if (auto v = raw(key)) {
      try {
        out = std::stoll(*v);
      } catch (const std::exception&) {
        throw ConfigError(name_ + "." + key + " is not an integer: " + *v);
      }
    }
  }

  void get(const std::string& key, double& out) const {
    if (auto v = raw(key)) {
      try {
        out = std::stod(*v);
      } catch (const std::exception&) {
        throw ConfigError(name_ + "." + key + " is not a number: " + *v);
      }
    }
  }

  template <typename T>
  void get(const std::string& key, std::optional<T>& out) const {
    if (raw(key)) {
      T value{};
      get(key, value);
      out = value;
    }
  }

 private:
  const std::map<std::string, std::string>* section_;
  std::string name_;
};

}  // namespace

std::map<std::string, std::map<std::string, std::string>> parse_toml(const std::string& text) {
  std::map<std::string, std::map<std::string, std::string>> doc;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // strip comments, but not inside quoted strings
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
      if (line[i] == '#' && !in_string) {
        line.resize(i);
        break;
      }
    }
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("malformed section header on line " + std::to_string(line_no));
      section = trim(t.substr(1, t.size() - 2));
      doc[section];
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected key = value on line " + std::to_string(line_no));
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("empty key or value on line " + std::to_string(line_no));
    doc[section][key] = value;
  }
  return doc;
}

vlm::VlmConfig RunConfig::vlm_config() const {
  aftermath::vlm::VlmConfig c;
  c.endpoint_url = vlm.endpoint;
  c.model_name = vlm.model;
  c.temperature = vlm.temperature;
  c.max_output_tokens = vlm.max_output_tokens;
  c.timeout_s = vlm.timeout_s;
  c.max_image_edge = vlm.max_image_edge;
  return c;
}

json RunConfig::to_json() const {
  json j{{"ingest",
          {{"stride", ingest.stride},
           {"pseudo_count", ingest.pseudo_count},
           {"pad", ingest.pad}}},
         {"enhance",
          {{"backend", std::string(enhance::backend_name(enhance.backend))},
           {"scale", enhance.scale},
           {"service_url", enhance.service_url},
           {"timeout_s", enhance.timeout_s},
           {"window", enhance.window}}},
         {"vlm",
          {{"endpoint", vlm.endpoint},
           {"model", vlm.model},
           {"temperature", vlm.temperature},
           {"max_output_tokens", vlm.max_output_tokens},
           {"timeout_s", vlm.timeout_s},
           {"max_image_edge", vlm.max_image_edge},
           {"repetitions", vlm.repetitions},
           {"concurrency", vlm.concurrency}}},
         {"prompts", {{"dir", prompts_dir.string()}}},
         {"out", out_dir.string()}};
  if (ingest.fps_override) j["ingest"]["fps_override"] = *ingest.fps_override;
  if (cache_dir) j["cache"] = cache_dir->string();
  return j;
}

std::string RunConfig::to_toml() const {
  std::ostringstream out;
  out << "[ingest]\n";
  out << "stride = " << ingest.stride << "\n";
  out << "pseudo_count = " << ingest.pseudo_count << "\n";
  out << "pad = " << format_double(ingest.pad) << "\n";
  if (ingest.fps_override) out << "fps_override = " << format_double(*ingest.fps_override) << "\n";
  out << "\n[enhance]\n";
  out << "backend = " << quote(std::string(enhance::backend_name(enhance.backend))) << "\n";
  out << "scale = " << enhance.scale << "\n";
  out << "service_url = " << quote(enhance.service_url) << "\n";
  out << "timeout_s = " << format_double(enhance.timeout_s) << "\n";
  out << "window = " << enhance.window << "\n";
  out << "\n[vlm]\n";
  out << "endpoint = " << quote(vlm.endpoint) << "\n";
  out << "model = " << quote(vlm.model) << "\n";
  out << "temperature = " << format_double(vlm.temperature) << "\n";
  out << "max_output_tokens = " << vlm.max_output_tokens << "\n";
  out << "timeout_s = " << format_double(vlm.timeout_s) << "\n";
  out << "max_image_edge = " << vlm.max_image_edge << "\n";
  out << "repetitions = " << vlm.repetitions << "\n";
  out << "concurrency = " << vlm.concurrency << "\n";
  out << "\n[paths]\n";
  out << "prompts = " << quote(prompts_dir.string()) << "\n";
  out << "out = " << quote(out_dir.string()) << "\n";
  if (cache_dir) out << "cache = " << quote(cache_dir->string()) << "\n";
  out << "\n[run]\n";
  if (run.created_at_epoch) out << "created_at_epoch = " << *run.created_at_epoch << "\n";
  if (run.run_id) out << "run_id = " << quote(*run.run_id) << "\n";
  return out.str();
}

RunConfig RunConfig::from_toml(const std::string& text) {
  auto doc = parse_toml(text);
  RunConfig cfg;

  Section ingest_s(doc, "ingest");
  ingest_s.get("stride", cfg.ingest.stride);
  ingest_s.get("pseudo_count", cfg.ingest.pseudo_count);
  ingest_s.get("pad", cfg.ingest.pad);
  ingest_s.get("fps_override", cfg.ingest.fps_override);

  Section enhance_s(doc, "enhance");
  std::string backend;
  enhance_s.get("backend", backend);
  if (!backend.empty()) cfg.enhance.backend = enhance::parse_backend(backend);
  enhance_s.get("scale", cfg.enhance.scale);
  enhance_s.get("service_url", cfg.enhance.service_url);
  enhance_s.get("timeout_s", cfg.enhance.timeout_s);
  enhance_s.get("window", cfg.enhance.window);

  Section vlm_s(doc, "vlm");
  vlm_s.get("endpoint", cfg.vlm.endpoint);
  vlm_s.get("model", cfg.vlm.model);
  vlm_s.get("temperature", cfg.vlm.temperature);
  vlm_s.get("max_output_tokens", cfg.vlm.max_output_tokens);
  vlm_s.get("timeout_s", cfg.vlm.timeout_s);
  vlm_s.get("max_image_edge", cfg.vlm.max_image_edge);
  vlm_s.get("repetitions", cfg.vlm.repetitions);
  vlm_s.get("concurrency", cfg.vlm.concurrency);

  Section paths_s(doc, "paths");
  std::string prompts, out_dir, cache;
  paths_s.get("prompts", prompts);
  paths_s.get("out", out_dir);
  paths_s.get("cache", cache);
  if (!prompts.empty()) cfg.prompts_dir = prompts;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (!cache.empty()) cfg.cache_dir = cache;

  Section run_s(doc, "run");
  run_s.get("created_at_epoch", cfg.run.created_at_epoch);
  run_s.get("run_id", cfg.run.run_id);

  if (cfg.ingest.stride < 1) throw ConfigError("ingest.stride must be >= 1");
  if (cfg.ingest.pseudo_count < 1) throw ConfigError("ingest.pseudo_count must be >= 1");
  if (cfg.ingest.pad < 0 || cfg.ingest.pad > 1)
    throw ConfigError("ingest.pad must be in [0, 1]");
  if (cfg.enhance.scale < 1) throw ConfigError("enhance.scale must be >= 1");
  if (cfg.enhance.window < 1) throw ConfigError("enhance.window must be >= 1");
  if (cfg.vlm.repetitions < 1) throw ConfigError("vlm.repetitions must be >= 1");
  if (cfg.vlm.concurrency < 1) throw ConfigError("vlm.concurrency must be >= 1");
  return cfg;
}

RunConfig RunConfig::from_toml_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_toml(buf.str());
}

void RunConfig::apply_env() {
  if (const char* v = std::getenv("AFTERMATH_VLM_URL"); v && *v) vlm.endpoint = v;
  if (const char* v = std::getenv("AFTERMATH_SR_URL"); v && *v) enhance.service_url = v;
}

}  // namespace aftermath::config
