/*
 * Copyright (c) 2026 The Self-Assistant Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Canonical JSON: "type" first, then fields in wire order. Enums are spelled
// as lowercase names. Used for the event log and the WebSocket mirror.

#include <array>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "selfassist/device.hpp"
#include "selfassist/protocol.hpp"
#include "selfassist/record.hpp"

namespace selfassist::json
{

using Json = nlohmann::ordered_json;

class JsonError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::array<std::string_view, 5> kSessionKindNames = {
  "started", "step_advanced", "phase_changed", "completed", "cancelled"};
inline constexpr std::array<std::string_view, 2> kPhaseNames = {"tense", "relax"};
inline constexpr std::array<std::string_view, 3> kCommandNames = {
  "start_training", "cancel_training", "toggle_silent"};

namespace detail
{

template<std::size_t N>
std::size_t index_of(const std::array<std::string_view, N> & names, const Json & v, const char * field)
{
  if (!v.is_string()) {
    throw JsonError(std::string(field) + " must be a string");
  }
  const auto s = v.get<std::string>();
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) {
      return i;
    }
  }
  throw JsonError("unknown " + std::string(field) + " '" + s + "'");
}

template<typename T>
T field(const Json & j, const char * name)
{
  const auto it = j.find(name);
  if (it == j.end()) {
    throw JsonError(std::string("missing field ") + name);
  }
  if constexpr (std::is_same_v<T, bool>) {
    if (!it->is_boolean()) {
      throw JsonError(std::string(name) + " must be a boolean");
    }
    return it->template get<bool>();
  } else {
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->template get<std::int64_t>() >= 0)) {
      throw JsonError(std::string(name) + " must be a non-negative integer");
    }
    const auto v = it->template get<std::uint64_t>();
    if (v > std::numeric_limits<T>::max()) {
      throw JsonError(std::string(name) + " out of range");
    }
    return static_cast<T>(v);
  }
}

inline Json record_json(const HistoryRecord & r)
{
  Json j;
  j["t_ms"] = r.t_ms;
  j["kind"] = std::string(to_string(r.kind));
  j["value"] = r.value;
  return j;
}

inline HistoryRecord record_from_json(const Json & j)
{
  HistoryRecord r;
  r.t_ms = field<std::uint64_t>(j, "t_ms");
  const auto kind = j.find("kind");
  if (kind == j.end() || !kind->is_string()) {
    throw JsonError("record kind must be a string");
  }
  const auto k = record_kind_from_string(kind->get<std::string>());
  if (!k) {
    throw JsonError("unknown record kind");
  }
  r.kind = *k;
  r.value = field<std::uint16_t>(j, "value");
  return r;
}

struct MessageToJson
{
  Json operator()(const protocol::LevelUpdate & m) const
  {
    Json j;
    j["type"] = "LevelUpdate";
    j["t_ms"] = m.t_ms;
    j["accumulator"] = m.accumulator;
    j["led_level"] = m.led_level;
    return j;
  }
  Json operator()(const protocol::Squeeze & m) const
  {
    Json j;
    j["type"] = "Squeeze";
    j["t_ms"] = m.t_ms;
    j["peak"] = m.peak;
    j["duration_ms"] = m.duration_ms;
    return j;
  }
  Json operator()(const protocol::TrainingPrompt & m) const
  {
    Json j;
    j["type"] = "TrainingPrompt";
    j["t_ms"] = m.t_ms;
    return j;
  }
  Json operator()(const protocol::SessionEvent & m) const
  {
    Json j;
    j["type"] = "SessionEvent";
    j["t_ms"] = m.t_ms;
    j["kind"] = std::string(kSessionKindNames.at(static_cast<std::size_t>(m.kind)));
    j["step"] = m.step;
    j["phase"] = std::string(kPhaseNames.at(static_cast<std::size_t>(m.phase)));
    return j;
  }
  Json operator()(const protocol::SilentMode & m) const
  {
    Json j;
    j["type"] = "SilentMode";
    j["t_ms"] = m.t_ms;
    j["on"] = m.on;
    return j;
  }
  Json operator()(const protocol::Command & m) const
  {
    Json j;
    j["type"] = "Command";
    j["cmd"] = std::string(kCommandNames.at(static_cast<std::size_t>(m.cmd)));
    return j;
  }
  Json operator()(const protocol::HistoryRequest & m) const
  {
    Json j;
    j["type"] = "HistoryRequest";
    j["from_ms"] = m.from_ms;
    j["to_ms"] = m.to_ms;
    return j;
  }
  Json operator()(const protocol::HistoryResponse & m) const
  {
    Json j;
    j["type"] = "HistoryResponse";
    j["count"] = m.records.size();
    j["records"] = Json::array();
    for (const auto & r : m.records) {
      j["records"].push_back(record_json(r));
    }
    return j;
  }
};

}  // namespace detail

inline Json to_json(const protocol::Message & m)
{
  return std::visit(detail::MessageToJson{}, m);
}

inline protocol::Message message_from_json(const Json & j)
{
  using namespace protocol;
  if (!j.is_object()) {
    throw JsonError("message must be an object");
  }
  const auto t = j.find("type");
  if (t == j.end() || !t->is_string()) {
    throw JsonError("missing type");
  }
  const auto type = t->get<std::string>();
  using detail::field;
  if (type == "LevelUpdate") {
    return LevelUpdate{field<std::uint64_t>(j, "t_ms"), field<std::uint16_t>(j, "accumulator"),
      field<std::uint8_t>(j, "led_level")};
  }
  if (type == "Squeeze") {
    return Squeeze{field<std::uint64_t>(j, "t_ms"), field<std::uint16_t>(j, "peak"),
      field<std::uint16_t>(j, "duration_ms")};
  }
  if (type == "TrainingPrompt") {
    return TrainingPrompt{field<std::uint64_t>(j, "t_ms")};
  }
  if (type == "SessionEvent") {
    SessionEvent m;
    m.t_ms = field<std::uint64_t>(j, "t_ms");
    m.kind = static_cast<SessionKind>(detail::index_of(kSessionKindNames, j.value("kind", Json{}), "kind"));
    m.step = field<std::uint8_t>(j, "step");
    m.phase = static_cast<Phase>(detail::index_of(kPhaseNames, j.value("phase", Json{}), "phase"));
    return m;
  }
  if (type == "SilentMode") {
    return SilentMode{field<std::uint64_t>(j, "t_ms"), field<bool>(j, "on")};
  }
  if (type == "Command") {
    return Command{static_cast<CommandCode>(detail::index_of(kCommandNames, j.value("cmd", Json{}), "cmd"))};
  }
  if (type == "HistoryRequest") {
    return HistoryRequest{field<std::uint64_t>(j, "from_ms"), field<std::uint64_t>(j, "to_ms")};
  }
  if (type == "HistoryResponse") {
    HistoryResponse m;
    const auto recs = j.find("records");
    if (recs == j.end() || !recs->is_array()) {
      throw JsonError("records must be an array");
    }
    for (const auto & r : *recs) {
      m.records.push_back(detail::record_from_json(r));
    }
    if (field<std::uint16_t>(j, "count") != m.records.size()) {
      throw JsonError("count does not match records");
    }
    return m;
  }
  throw JsonError("unknown message type '" + type + "'");
}

inline protocol::Message parse_message(std::string_view text)
{
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw JsonError("invalid JSON");
  }
  return message_from_json(j);
}

struct OutputToJson
{
  std::uint64_t t_ms;

  Json operator()(const device::LedFrame & f) const
  {
    Json j;
    j["type"] = "LedFrame";
    j["t_ms"] = t_ms;
    j["white"] = f.white;
    j["blue"] = f.blue;
    return j;
  }
  Json operator()(const device::LcdText & l) const
  {
    Json j;
    j["type"] = "LcdText";
    j["t_ms"] = t_ms;
    j["line"] = l.line;
    return j;
  }
  Json operator()(const protocol::Message & m) const {return to_json(m);}
  Json operator()(const HistoryRecord & r) const
  {
    Json j;
    j["type"] = "HistoryRecord";
    j.update(detail::record_json(r));
    return j;
  }
};

inline Json to_json(const device::Output & o)
{
  return std::visit(OutputToJson{o.t_ms}, o.body);
}

inline std::string dump(const Json & j) {return j.dump();}

}  // namespace selfassist::json
