#include "tilewall/interact/script.hpp"

#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "tilewall/interact/session.hpp"

namespace tw::interact {

using nlohmann::json;

std::vector<EventMsg> parse_event_script(const std::string& json_text) {
  json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded()) throw std::invalid_argument("event script is not valid JSON");
  if (!doc.is_object() || !doc.contains("events") || !doc["events"].is_array()) {
    throw std::invalid_argument("event script needs an 'events' array");
  }
  std::vector<EventMsg> out;
  std::size_t idx = 0;
  for (const json& e : doc["events"]) {
    const std::string where = "events[" + std::to_string(idx++) + "]";
    try {
      const std::string kind = e.at("kind").get<std::string>();
      const auto button = static_cast<std::uint8_t>(e.value("button", 0));
      if (kind == "down") {
        out.push_back(pointer_down(button, e.at("x").get<float>(), e.at("y").get<float>()));
      } else if (kind == "move") {
        out.push_back(pointer_move(button, e.at("x").get<float>(), e.at("y").get<float>()));
      } else if (kind == "up") {
        out.push_back(pointer_up(button));
      } else if (kind == "wheel") {
        out.push_back(wheel(e.at("delta").get<float>()));
      } else if (kind == "key") {
        out.push_back(key(e.at("code").get<std::uint32_t>(), e.value("down", true)));
      } else if (kind == "set_mode") {
        out.push_back(set_mode(e.at("mode").get<std::uint8_t>()));
      } else if (kind == "toggle_cache") {
        out.push_back(toggle_cache());
      } else if (kind == "quit") {
        out.push_back(quit());
      } else if (kind == "rotate") {
        const auto more = rotate_script(e.at("frames").get<std::uint32_t>(), e.value("step", 0.02f));
        out.insert(out.end(), more.begin(), more.end());
      } else {
        throw std::invalid_argument("unknown kind '" + kind + "'");
      }
    } catch (const json::exception& ex) {
      throw std::invalid_argument(where + ": " + ex.what());
    } catch (const std::invalid_argument& ex) {
      throw std::invalid_argument(where + ": " + ex.what());
    }
  }
  return out;
}

std::vector<EventMsg> load_event_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_event_script(ss.str());
}

std::vector<EventMsg> rotate_script(std::uint32_t frames, float step) {
  std::vector<EventMsg> out;
  out.push_back(pointer_down(kButtonRotate, 0.0f, 0.0f));
  for (std::uint32_t k = 1; k <= frames; ++k) {
    out.push_back(pointer_move(kButtonRotate, step * static_cast<float>(k), 0.0f));
  }
  out.push_back(pointer_up(kButtonRotate));
  return out;
}

std::vector<EventMsg> random_script(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> coord(-1.0f, 1.0f);
  std::uniform_real_distribution<float> delta(-3.0f, 3.0f);
  std::uniform_int_distribution<int> pick(0, 99);
  std::vector<EventMsg> out;
  out.reserve(n);
  int held = -1;
  while (out.size() < n) {
    const int r = pick(rng);
    if (held < 0) {
      if (r < 50) {
        held = pick(rng) % 3;
        out.push_back(pointer_down(static_cast<std::uint8_t>(held), coord(rng), coord(rng)));
      } else if (r < 75) {
        out.push_back(wheel(delta(rng)));
      } else if (r < 85) {
        out.push_back(key(r < 80 ? kKeyReset : static_cast<std::uint32_t>('a' + r % 26), pick(rng) < 50));
      } else if (r < 93) {
        out.push_back(set_mode(static_cast<std::uint8_t>(pick(rng) % 2)));
      } else {
        out.push_back(toggle_cache());
      }
    } else if (r < 85) {
      out.push_back(pointer_move(static_cast<std::uint8_t>(held), coord(rng), coord(rng)));
    } else if (r < 95) {
      out.push_back(pointer_up(static_cast<std::uint8_t>(held)));
      held = -1;
    } else {
      out.push_back(wheel(delta(rng)));
    }
  }
  return out;
}

}  // namespace tw::interact
