#include "tilewall/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

extern char** environ;

namespace tw::config {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += "\n  - " + s;
  return out;
}

const std::vector<std::string> kTopKeys = {
    "mode",      "app_nodes",   "tile_rows",      "tile_cols",    "tile_width",   "tile_height",
    "bandwidth_mbps", "latency_ms", "bandwidth_efficiency", "caching", "master_addr", "server_addrs",
    "ui_addr",   "watchdog_sec", "bucket_batch",  "render_cost_sec", "scene"};

const std::vector<std::string> kSceneKeys = {"kind", "bytes", "seed", "path", "dims", "partition", "cacheable"};

// Typed field readers: on a type mismatch they record a problem and leave the value alone.
template <typename T>
void read_int(const json& j, const std::string& key, T& out, long long min, std::vector<std::string>& problems,
              const std::string& prefix = "") {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number_integer()) {
    problems.push_back(prefix + key + ": expected an integer");
    return;
  }
  const long long x = v.get<long long>();
  if (x < min) {
    problems.push_back(prefix + key + ": must be >= " + std::to_string(min) + ", got " + std::to_string(x));
    return;
  }
  out = static_cast<T>(x);
}

bool read_number(const json& j, const std::string& key, double& out, std::vector<std::string>& problems,
                 const std::string& prefix = "") {
  if (!j.contains(key)) return false;
  const json& v = j.at(key);
  if (!v.is_number()) {
    problems.push_back(prefix + key + ": expected a number");
    return false;
  }
  out = v.get<double>();
  return true;
}

void read_bool(const json& j, const std::string& key, bool& out, std::vector<std::string>& problems,
               const std::string& prefix = "") {
  if (!j.contains(key)) return;
  if (!j.at(key).is_boolean()) {
    problems.push_back(prefix + key + ": expected true or false");
    return;
  }
  out = j.at(key).get<bool>();
}

bool read_string(const json& j, const std::string& key, std::string& out, std::vector<std::string>& problems,
                 const std::string& prefix = "") {
  if (!j.contains(key)) return false;
  if (!j.at(key).is_string()) {
    problems.push_back(prefix + key + ": expected a string");
    return false;
  }
  out = j.at(key).get<std::string>();
  return true;
}

void check_addr(const std::string& key, const std::string& addr, std::vector<std::string>& problems) {
  try {
    wire::parse_host_port(addr);
  } catch (const std::exception& e) {
    problems.push_back(key + ": " + e.what());
  }
}

void apply_scene(const json& j, cluster::SceneSpec& scene, std::vector<std::string>& problems) {
  const std::string p = "scene.";
  if (!j.is_object()) {
    problems.push_back("scene: expected an object");
    return;
  }
  for (const auto& [k, v] : j.items()) {
    if (std::find(kSceneKeys.begin(), kSceneKeys.end(), k) == kSceneKeys.end()) {
      problems.push_back(p + k + ": unknown key");
    }
  }
  std::string s;
  if (read_string(j, "kind", s, problems, p)) {
    try {
      scene.kind = cluster::parse_scene_kind(s);
    } catch (const std::exception& e) {
      problems.push_back(p + "kind: " + e.what());
    }
  }
  read_int(j, "bytes", scene.bytes, kWireTriangleBytes, problems, p);
  if (j.contains("seed")) {
    if (j.at("seed").is_number_unsigned()) {
      scene.seed = j.at("seed").get<std::uint64_t>();
    } else {
      problems.push_back(p + "seed: expected a non-negative integer");
    }
  }
  read_string(j, "path", scene.path, problems, p);
  if (j.contains("dims")) {
    const json& d = j.at("dims");
    if (!d.is_array() || d.size() != 3 ||
        !std::all_of(d.begin(), d.end(), [](const json& x) { return x.is_number_unsigned() && x.get<long long>() > 0; })) {
      problems.push_back(p + "dims: expected three positive integers");
    } else {
      for (int i = 0; i < 3; ++i) scene.dims[i] = d[i].get<std::uint32_t>();
    }
  }
  if (read_string(j, "partition", s, problems, p)) {
    try {
      scene.partition = parse_partition_strategy(s);
    } catch (const std::exception& e) {
      problems.push_back(p + "partition: " + e.what());
    }
  }
  read_bool(j, "cacheable", scene.cacheable, problems, p);
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error("invalid configuration:" + join(problems)), problems_(std::move(problems)) {}

Env process_env() {
  Env env;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    const std::string kv = *e;
    if (kv.rfind("TW_", 0) != 0) continue;
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    env[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return env;
}

void apply_json(const json& j, cluster::JobConfig& cfg, std::vector<std::string>& problems) {
  if (!j.is_object()) {
    problems.push_back("configuration must be a JSON object");
    return;
  }
  for (const auto& [k, v] : j.items()) {
    if (std::find(kTopKeys.begin(), kTopKeys.end(), k) == kTopKeys.end()) problems.push_back(k + ": unknown key");
  }
  std::string s;
  if (read_string(j, "mode", s, problems)) {
    try {
      cfg.mode = cluster::parse_display_mode(s);
    } catch (const std::exception& e) {
      problems.push_back(std::string("mode: ") + e.what());
    }
  }
  read_int(j, "app_nodes", cfg.app_nodes, 1, problems);
  read_int(j, "tile_rows", cfg.tile_rows, 1, problems);
  read_int(j, "tile_cols", cfg.tile_cols, 1, problems);
  read_int(j, "tile_width", cfg.tile_width, 1, problems);
  read_int(j, "tile_height", cfg.tile_height, 1, problems);

  double mbps = 0.0;
  if (read_number(j, "bandwidth_mbps", mbps, problems)) {
    if (mbps <= 0.0) {
      problems.push_back("bandwidth_mbps: must be positive");
    } else {
      if (!cfg.throttle) cfg.throttle = wire::ThrottleSpec{};
      cfg.throttle->bandwidth_bits_per_sec = mbps * 1e6;
    }
  }
  double latency_ms = 0.0;
  if (read_number(j, "latency_ms", latency_ms, problems)) {
    if (latency_ms < 0.0) {
      problems.push_back("latency_ms: must be non-negative");
    } else if (!cfg.throttle) {
      problems.push_back("latency_ms: requires bandwidth_mbps");
    } else {
      cfg.throttle->latency_sec = latency_ms / 1000.0;
    }
  }
  double eff = 1.0;
  if (read_number(j, "bandwidth_efficiency", eff, problems)) {
    if (!(eff > 0.0 && eff <= 1.0)) {
      problems.push_back("bandwidth_efficiency: must be in (0, 1]");
    } else if (!cfg.throttle) {
      problems.push_back("bandwidth_efficiency: requires bandwidth_mbps");
    } else {
      cfg.throttle->efficiency = eff;
    }
  }
  read_bool(j, "caching", cfg.caching, problems);
  if (read_string(j, "master_addr", cfg.master_addr, problems)) check_addr("master_addr", cfg.master_addr, problems);
  if (j.contains("server_addrs")) {
    const json& a = j.at("server_addrs");
    if (!a.is_array() || !std::all_of(a.begin(), a.end(), [](const json& x) { return x.is_string(); })) {
      problems.push_back("server_addrs: expected an array of strings");
    } else {
      cfg.server_addrs.clear();
      for (const json& x : a) {
        cfg.server_addrs.push_back(x.get<std::string>());
        check_addr("server_addrs", cfg.server_addrs.back(), problems);
      }
    }
  }
  if (read_string(j, "ui_addr", cfg.ui_addr, problems) && !cfg.ui_addr.empty()) {
    check_addr("ui_addr", cfg.ui_addr, problems);
  }
  double watchdog = 0.0;
  if (read_number(j, "watchdog_sec", watchdog, problems)) {
    if (!(watchdog > 0.0)) {
      problems.push_back("watchdog_sec: must be positive");
    } else {
      cfg.watchdog_sec = watchdog;
    }
  }
  read_int(j, "bucket_batch", cfg.bucket_batch, 1, problems);
  double cost = 0.0;
  if (read_number(j, "render_cost_sec", cost, problems)) {
    if (cost < 0.0) {
      problems.push_back("render_cost_sec: must be non-negative");
    } else {
      cfg.render_cost_sec = cost;
    }
  }
  if (j.contains("scene")) apply_scene(j.at("scene"), cfg.scene, problems);
}

void validate(const cluster::JobConfig& cfg, std::vector<std::string>& problems) {
  if (cfg.grid().mural_w() > 65535 || cfg.grid().mural_h() > 65535) {
    problems.push_back("mural larger than 65535 pixels on a side");
  }
  if (!cfg.server_addrs.empty() && cfg.server_addrs.size() != cfg.servers()) {
    problems.push_back("server_addrs: expected " + std::to_string(cfg.servers()) + " addresses (tile_rows x tile_cols), got " +
                       std::to_string(cfg.server_addrs.size()));
  }
  if (cfg.app_nodes > 65535) problems.push_back("app_nodes: at most 65535");
  if ((cfg.scene.kind == cluster::SceneSpec::Kind::stl) && cfg.scene.path.empty()) {
    problems.push_back("scene.path: required for kind 'stl'");
  }
}

cluster::JobConfig parse_config_text(const std::string& text, const Env& env) {
  std::vector<std::string> problems;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("not valid JSON: ") + e.what()});
  }
  if (!j.is_object()) throw ConfigError({"configuration must be a JSON object"});

  for (const auto& [name, value] : env) {
    if (name.rfind("TW_", 0) != 0) continue;
    std::string key = name.substr(3);
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    if (key == "scene") continue;
    json v = json::parse(value, nullptr, false);
    if (v.is_discarded()) v = value;
    j[key] = v;
  }

  cluster::JobConfig cfg;
  apply_json(j, cfg, problems);
  if (problems.empty()) validate(cfg, problems);
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return cfg;
}

cluster::JobConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read " + path.string()});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), process_env());
}

json to_json(const cluster::JobConfig& cfg) {
  json j;
  j["mode"] = cluster::to_string(cfg.mode);
  j["app_nodes"] = cfg.app_nodes;
  j["tile_rows"] = cfg.tile_rows;
  j["tile_cols"] = cfg.tile_cols;
  j["tile_width"] = cfg.tile_width;
  j["tile_height"] = cfg.tile_height;
  if (cfg.throttle) {
    j["bandwidth_mbps"] = cfg.throttle->bandwidth_bits_per_sec / 1e6;
    j["latency_ms"] = cfg.throttle->latency_sec * 1000.0;
    j["bandwidth_efficiency"] = cfg.throttle->efficiency;
  }
  j["caching"] = cfg.caching;
  j["master_addr"] = cfg.master_addr;
  j["server_addrs"] = cfg.resolved_server_addrs();
  j["ui_addr"] = cfg.ui_addr;
  j["watchdog_sec"] = cfg.watchdog_sec;
  j["bucket_batch"] = cfg.bucket_batch;
  j["render_cost_sec"] = cfg.render_cost_sec;
  json scene;
  scene["kind"] = cluster::to_string(cfg.scene.kind);
  scene["bytes"] = cfg.scene.bytes;
  scene["seed"] = cfg.scene.seed;
  if (!cfg.scene.path.empty()) scene["path"] = cfg.scene.path;
  scene["dims"] = cfg.scene.dims;
  scene["partition"] = cfg.scene.partition == PartitionStrategy::contiguous ? "contiguous" : "interleaved";
  scene["cacheable"] = cfg.scene.cacheable;
  j["scene"] = scene;
  return j;
}

}  // namespace tw::config
