#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tilewall/interact/event.hpp"

namespace tw::interact {

/// Parses a JSON event script:
///   {"events": [{"kind": "down", "button": 0, "x": 0, "y": 0},
///               {"kind": "move", "button": 0, "x": 0.1, "y": 0},
///               {"kind": "up", "button": 0}, {"kind": "wheel", "delta": 1},
///               {"kind": "key", "code": 114, "down": true},
///               {"kind": "set_mode", "mode": 1}, {"kind": "toggle_cache"},
///               {"kind": "rotate", "frames": 10, "step": 0.02}, {"kind": "quit"}]}
/// "rotate" expands to a rotate drag of `frames` moves. seq fields are left 0.
/// Throws std::invalid_argument naming the offending entry.
std::vector<EventMsg> parse_event_script(const std::string& json_text);
std::vector<EventMsg> load_event_script(const std::filesystem::path& path);

/// POINTER_DOWN(rotate) at the origin, `frames` moves of `step` along x, POINTER_UP.
std::vector<EventMsg> rotate_script(std::uint32_t frames, float step);

/// Random mix of every camera-affecting kind (no QUIT), with drags kept
/// consistent (moves only while a button is down).
std::vector<EventMsg> random_script(std::size_t n, std::uint64_t seed);

}  // namespace tw::interact
