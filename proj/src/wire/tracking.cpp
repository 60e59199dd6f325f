#include "tilewall/wire/tracking.hpp"

#include <string>

namespace tw::wire {

TrackDecision track(const Command& cmd, ServerStateMirror& mirror) {
  bool redundant = false;
  if (const auto* cam = std::get_if<SetCamera>(&cmd)) {
    redundant = mirror.last_camera && *mirror.last_camera == cam->matrix;
  } else if (const auto* clear = std::get_if<Clear>(&cmd)) {
    redundant = mirror.last_clear && *mirror.last_clear == *clear;
  } else if (const auto* list = std::get_if<DefineList>(&cmd)) {
    redundant = mirror.defined_lists.contains(list->id);
  }
  if (redundant) return TrackDecision::suppress;
  apply(cmd, mirror);
  return TrackDecision::send;
}

void apply(const Command& cmd, ServerStateMirror& mirror) {
  if (const auto* cam = std::get_if<SetCamera>(&cmd)) {
    mirror.last_camera = cam->matrix;
  } else if (const auto* clear = std::get_if<Clear>(&cmd)) {
    mirror.last_clear = *clear;
  } else if (const auto* list = std::get_if<DefineList>(&cmd)) {
    mirror.defined_lists.insert(list->id);
  } else if (std::holds_alternative<BeginFrame>(cmd)) {
    mirror.last_clear.reset();
  }
}

void ListStore::define(DisplayList list) {
  auto it = lists_.find(list.id);
  if (it != lists_.end()) {
    if (!(it->second == list)) throw ProtocolError("display list " + std::to_string(list.id) + " redefined");
    return;
  }
  const std::uint32_t id = list.id;
  lists_.emplace(id, std::move(list));
}

const DisplayList& ListStore::call(std::uint32_t id) const {
  auto it = lists_.find(id);
  if (it == lists_.end()) throw ProtocolError("CALL_LIST of undefined display list " + std::to_string(id));
  return it->second;
}

std::set<std::uint32_t> ListStore::ids() const {
  std::set<std::uint32_t> out;
  for (const auto& [id, list] : lists_) out.insert(id);
  return out;
}

}  // namespace tw::wire
