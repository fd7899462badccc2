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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "selfassist/config.hpp"
#include "selfassist/device.hpp"

namespace selfassist::sim
{

class TraceError : public std::runtime_error
{
public:
  TraceError(const std::string & what, std::size_t line)
  : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const noexcept {return line_;}

private:
  std::size_t line_;
};

using Trace = std::vector<device::PressureSample>;

namespace detail
{

// Calls fn(fields, line_no) for each data row of a two-column CSV after
// checking the header.
template<typename Fn>
void for_each_row(std::string_view text, std::string_view header, Fn && fn)
{
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      nl = text.size();
    }
    auto line = pmr::detail::trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) {
      continue;
    }
    if (!seen_header) {
      if (line != header) {
        throw TraceError("expected header '" + std::string(header) + "'", line_no);
      }
      seen_header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string_view::npos) {
      throw TraceError("expected two comma-separated fields", line_no);
    }
    fn(pmr::detail::trim(line.substr(0, comma)), pmr::detail::trim(line.substr(comma + 1)), line_no);
  }
  if (!seen_header) {
    throw TraceError("missing header '" + std::string(header) + "'", line_no);
  }
}

inline std::string slurp(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw TraceError("cannot open " + path.string(), 0);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

/// Parses a `t_ms,pressure` CSV. Time must not go backwards and pressure
/// must be a 10-bit reading.
inline Trace parse_trace(std::string_view text)
{
  Trace trace;
  detail::for_each_row(text, "t_ms,pressure",
    [&](std::string_view t, std::string_view p, std::size_t line) {
      const auto tv = pmr::detail::parse_int(t);
      const auto pv = pmr::detail::parse_int(p);
      if (!tv || *tv < 0) {
        throw TraceError("bad t_ms '" + std::string(t) + "'", line);
      }
      if (!pv || *pv < 0 || *pv > 1023) {
        throw TraceError("pressure out of range [0, 1023]: '" + std::string(p) + "'", line);
      }
      const auto ts = static_cast<std::uint64_t>(*tv);
      if (!trace.empty() && ts < trace.back().t_ms) {
        throw TraceError("t_ms goes backwards", line);
      }
      trace.push_back({ts, static_cast<std::uint16_t>(*pv)});
    });
  return trace;
}

inline Trace load_trace(const std::filesystem::path & path)
{
  return parse_trace(detail::slurp(path));
}

inline std::string format_trace(const Trace & trace)
{
  std::string out = "t_ms,pressure\n";
  for (const auto & s : trace) {
    out += std::to_string(s.t_ms) + "," + std::to_string(s.pressure) + "\n";
  }
  return out;
}

enum class Profile { calm, stressed };

inline constexpr std::uint64_t kSamplePeriodMs = 50;

namespace detail
{

// Portable bounded draw; std::uniform_int_distribution differs across
// standard libraries and would break cross-platform trace identity.
inline std::uint64_t draw(std::mt19937_64 & rng, std::uint64_t lo, std::uint64_t hi)
{
  return lo + rng() % (hi - lo + 1);
}

}  // namespace detail

/**
 * Deterministic synthetic trace sampled every 50 ms over [0, duration_ms).
 *
 * calm: independent readings uniform in [0, 0.8 * p_hi].
 * stressed: rest gaps below p_lo / 2 alternating with squeezes that ramp to
 * a peak in [p_hi, 1023], hold, and release.
 */
inline Trace gen_trace(std::uint64_t seed, Profile profile, std::uint64_t duration_ms,
  const DeviceConfig & cfg = {})
{
  std::mt19937_64 rng(seed);
  Trace trace;
  trace.reserve(duration_ms / kSamplePeriodMs + 1);

  if (profile == Profile::calm) {
    const auto ceiling = static_cast<std::uint64_t>(cfg.p_hi * 8 / 10);
    for (std::uint64_t t = 0; t < duration_ms; t += kSamplePeriodMs) {
      trace.push_back({t, static_cast<std::uint16_t>(detail::draw(rng, 0, ceiling))});
    }
    return trace;
  }

  enum class Seg { gap, ramp, hold, release };
  Seg seg = Seg::gap;
  std::uint64_t seg_start = 0;
  std::uint64_t seg_len = detail::draw(rng, 600, 3000);
  std::uint64_t peak = 0;
  const std::uint64_t rest_max = cfg.p_lo / 2;

  for (std::uint64_t t = 0; t < duration_ms; t += kSamplePeriodMs) {
    while (t >= seg_start + seg_len) {
      seg_start += seg_len;
      switch (seg) {
        case Seg::gap:
          seg = Seg::ramp;
          peak = detail::draw(rng, cfg.p_hi, 1023);
          seg_len = detail::draw(rng, 100, 400);
          break;
        case Seg::ramp:
          seg = Seg::hold;
          seg_len = detail::draw(rng, 200, 1200);
          break;
        case Seg::hold:
          seg = Seg::release;
          seg_len = detail::draw(rng, 100, 300);
          break;
        case Seg::release:
          seg = Seg::gap;
          seg_len = detail::draw(rng, 600, 3000);
          break;
      }
    }
    const auto into = t - seg_start;
    std::uint64_t p = 0;
    switch (seg) {
      case Seg::gap:
        p = detail::draw(rng, 0, rest_max);
        break;
      case Seg::ramp:
        p = peak * into / seg_len;
        break;
      case Seg::hold:
        p = peak - detail::draw(rng, 0, (peak - cfg.p_hi) / 4);
        break;
      case Seg::release:
        p = peak * (seg_len - into) / seg_len;
        break;
    }
    trace.push_back({t, static_cast<std::uint16_t>(p)});
  }
  return trace;
}

/// Timed button presses and app commands, replayed alongside a trace.
struct ScriptEntry
{
  std::uint64_t t_ms = 0;
  device::Event event;
};

using Script = std::vector<ScriptEntry>;

/// Parses a `t_ms,event` CSV. Events: start, cancel, silent (device buttons)
/// and app_start, app_cancel, app_silent (companion-app commands).
inline Script parse_script(std::string_view text)
{
  using device::Button;
  using protocol::CommandCode;
  Script script;
  detail::for_each_row(text, "t_ms,event",
    [&](std::string_view t, std::string_view name, std::size_t line) {
      const auto tv = pmr::detail::parse_int(t);
      if (!tv || *tv < 0) {
        throw TraceError("bad t_ms '" + std::string(t) + "'", line);
      }
      const auto ts = static_cast<std::uint64_t>(*tv);
      if (!script.empty() && ts < script.back().t_ms) {
        throw TraceError("t_ms goes backwards", line);
      }
      device::Event ev;
      if (name == "start") {
        ev = device::ButtonPress{ts, Button::start};
      } else if (name == "cancel") {
        ev = device::ButtonPress{ts, Button::cancel};
      } else if (name == "silent") {
        ev = device::ButtonPress{ts, Button::silent};
      } else if (name == "app_start") {
        ev = device::AppCommand{ts, CommandCode::start_training};
      } else if (name == "app_cancel") {
        ev = device::AppCommand{ts, CommandCode::cancel_training};
      } else if (name == "app_silent") {
        ev = device::AppCommand{ts, CommandCode::toggle_silent};
      } else {
        throw TraceError("unknown event '" + std::string(name) + "'", line);
      }
      script.push_back({ts, ev});
    });
  return script;
}

inline Script load_script(const std::filesystem::path & path)
{
  return parse_script(detail::slurp(path));
}

}  // namespace selfassist::sim
