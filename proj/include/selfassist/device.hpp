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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "selfassist/config.hpp"
#include "selfassist/pmr.hpp"
#include "selfassist/protocol.hpp"
#include "selfassist/record.hpp"

namespace selfassist::device
{

inline constexpr std::uint8_t kLedOn = 255;
inline constexpr const char * kPromptLine = "Start PMR training";

struct PressureSample
{
  std::uint64_t t_ms = 0;
  std::uint16_t pressure = 0;
  friend bool operator==(const PressureSample &, const PressureSample &) = default;
};

struct SqueezeEvent
{
  std::uint64_t t_ms = 0;  // release
  std::uint16_t peak = 0;
  std::uint64_t duration_ms = 0;
  friend bool operator==(const SqueezeEvent &, const SqueezeEvent &) = default;
};

struct SqueezeDetector
{
  enum class Phase : std::uint8_t { idle, in_squeeze };

  Phase phase = Phase::idle;
  std::uint16_t peak = 0;
  std::uint64_t start_ms = 0;
  friend bool operator==(const SqueezeDetector &, const SqueezeDetector &) = default;
};

struct DetectResult
{
  SqueezeDetector detector;
  std::optional<SqueezeEvent> event;
};

/// Two-threshold detector: a squeeze opens at pressure >= p_hi and closes,
/// reporting its peak, at the first sample <= p_lo.
inline DetectResult detect_squeeze(
  SqueezeDetector d, const PressureSample & s, const DeviceConfig & cfg)
{
  using P = SqueezeDetector::Phase;
  if (d.phase == P::idle) {
    if (s.pressure >= cfg.p_hi) {
      return {{P::in_squeeze, s.pressure, s.t_ms}, std::nullopt};
    }
    return {d, std::nullopt};
  }
  if (s.pressure <= cfg.p_lo) {
    return {SqueezeDetector{}, SqueezeEvent{s.t_ms, d.peak, s.t_ms - d.start_ms}};
  }
  d.peak = std::max(d.peak, s.pressure);
  return {d, std::nullopt};
}

/// Adds the per-squeeze increment, round(delta_max * peak / 1023) clamped to
/// [delta_min, delta_max], saturating at a_max.
inline std::uint32_t accumulate(std::uint32_t acc, std::uint16_t peak, const DeviceConfig & cfg)
{
  // Round half up in integers: (2 * dmax * peak + 1023) / 2046.
  const std::uint64_t raw = (2ULL * cfg.delta_max * peak + 1023) / 2046;
  const auto delta = std::clamp<std::uint64_t>(raw, cfg.delta_min, cfg.delta_max);
  return static_cast<std::uint32_t>(std::min<std::uint64_t>(acc + delta, cfg.a_max));
}

inline std::uint32_t decay(std::uint32_t acc, std::uint64_t elapsed_ms, const DeviceConfig & cfg)
{
  if (cfg.decay_half_life_ms == 0) {
    return acc;
  }
  const double factor = std::exp2(
    -static_cast<double>(elapsed_ms) / static_cast<double>(cfg.decay_half_life_ms));
  return static_cast<std::uint32_t>(std::floor(acc * factor));
}

inline std::uint32_t led_level(std::uint32_t acc, const DeviceConfig & cfg)
{
  return static_cast<std::uint32_t>(std::uint64_t{cfg.led_count} * acc / cfg.a_max);
}

enum class Mode : std::uint8_t { sensing, training_prompt, training };

inline const char * to_string(Mode m)
{
  switch (m) {
    case Mode::sensing: return "Sensing";
    case Mode::training_prompt: return "TrainingPrompt";
    case Mode::training: return "Training";
  }
  return "?";
}

struct DeviceState
{
  Mode mode = Mode::sensing;
  std::uint32_t accumulator = 0;
  bool silent = false;
  SqueezeDetector detector;
  std::optional<pmr::Session> session;
  std::uint64_t last_tick_ms = 0;
  // Decay is evaluated from the last non-decay change so rounding never compounds.
  std::uint64_t decay_anchor_ms = 0;
  std::uint32_t decay_anchor_value = 0;

  friend bool operator==(const DeviceState &, const DeviceState &) = default;
};

struct LedFrame
{
  std::vector<std::uint8_t> white;
  bool blue = false;
  friend bool operator==(const LedFrame &, const LedFrame &) = default;
};

struct LcdText
{
  std::string line;
  friend bool operator==(const LcdText &, const LcdText &) = default;
};

// Input alphabet.
struct Tick { std::uint64_t t_ms = 0; };
enum class Button : std::uint8_t { silent, start, cancel };
struct ButtonPress { std::uint64_t t_ms = 0; Button button = Button::start; };
struct AppCommand { std::uint64_t t_ms = 0; protocol::CommandCode cmd = protocol::CommandCode::start_training; };

using Event = std::variant<Tick, PressureSample, ButtonPress, AppCommand>;

inline std::uint64_t time_of(const Event & e)
{
  return std::visit([](const auto & v) {return v.t_ms;}, e);
}

struct Output
{
  using Body = std::variant<LedFrame, LcdText, protocol::Message, HistoryRecord>;

  std::uint64_t t_ms = 0;
  Body body;
};

struct StepResult
{
  DeviceState state;
  std::vector<Output> outputs;
};

inline std::pair<LedFrame, LcdText> render(const DeviceState & s, const DeviceConfig & cfg)
{
  LedFrame led{std::vector<std::uint8_t>(cfg.led_count, 0), s.silent};
  LcdText lcd;
  switch (s.mode) {
    case Mode::sensing:
    case Mode::training_prompt:
      std::fill_n(led.white.begin(), led_level(s.accumulator, cfg), kLedOn);
      if (s.mode == Mode::training_prompt) {
        lcd.line = kPromptLine;
      }
      break;
    case Mode::training:
      led.white = pmr::led_pattern(*s.session, s.last_tick_ms, cfg.led_count);
      lcd.line = pmr::instruction_text(*s.session);
      break;
  }
  return {std::move(led), std::move(lcd)};
}

inline DeviceState initial_state() {return DeviceState{};}

/// Announces the starting level once at power-up.
inline std::vector<Output> boot(const DeviceState & s, const DeviceConfig & cfg, std::uint64_t t_ms = 0)
{
  protocol::LevelUpdate m{t_ms, static_cast<std::uint16_t>(s.accumulator),
    static_cast<std::uint8_t>(led_level(s.accumulator, cfg))};
  return {Output{t_ms, protocol::Message{m}}};
}

namespace detail
{

inline protocol::Phase wire_phase(pmr::Phase p)
{
  return p == pmr::Phase::tense ? protocol::Phase::tense : protocol::Phase::relax;
}

class Machine
{
public:
  Machine(DeviceState & s, std::vector<Output> & out, const DeviceConfig & cfg)
  : s_(s), out_(out), cfg_(cfg) {}

  // Session boundaries or decay up to `now`.
  void progress(std::uint64_t now)
  {
    if (s_.mode == Mode::training) {
      auto res = pmr::advance(*s_.session, now);
      for (const auto & e : res.events) {
        protocol::SessionKind kind = protocol::SessionKind::phase_changed;
        if (e.kind == pmr::Event::Kind::step_advanced) {
          kind = protocol::SessionKind::step_advanced;
        } else if (e.kind == pmr::Event::Kind::completed) {
          kind = protocol::SessionKind::completed;
        }
        message(e.t_ms, protocol::SessionEvent{e.t_ms, kind,
            static_cast<std::uint8_t>(e.step_index), wire_phase(e.phase)});
      }
      if (res.completed()) {
        const auto end = res.events.back().t_ms;
        record(end, RecordKind::session_completed, 0);
        s_.session.reset();
        s_.mode = Mode::sensing;
        set_level(end, 0);
      } else {
        s_.session = std::move(res.session);
      }
    } else if (s_.mode == Mode::sensing && cfg_.decay_half_life_ms > 0) {
      const auto v = decay(s_.decay_anchor_value, now - s_.decay_anchor_ms, cfg_);
      if (v != s_.accumulator) {
        s_.accumulator = v;
        level_update(now);
      }
    }
  }

  void sample(const PressureSample & p)
  {
    auto det = detect_squeeze(s_.detector, p, cfg_);
    s_.detector = det.detector;
    if (!det.event) {
      return;
    }
    const auto & sq = *det.event;
    const auto dur = static_cast<std::uint16_t>(std::min<std::uint64_t>(sq.duration_ms, 0xFFFF));
    message(sq.t_ms, protocol::Squeeze{sq.t_ms, sq.peak, dur});
    record(sq.t_ms, RecordKind::squeeze, sq.peak);
    if (s_.mode != Mode::sensing) {
      return;
    }
    set_level(sq.t_ms, accumulate(s_.accumulator, sq.peak, cfg_));
    if (s_.accumulator == cfg_.a_max) {
      s_.mode = Mode::training_prompt;
      message(sq.t_ms, protocol::TrainingPrompt{sq.t_ms});
      record(sq.t_ms, RecordKind::prompt, 0);
    }
  }

  void start(std::uint64_t now)
  {
    if (s_.mode != Mode::training_prompt) {
      return;
    }
    s_.mode = Mode::training;
    s_.session = pmr::start_session(cfg_.plan, now);
    message(now, protocol::SessionEvent{now, protocol::SessionKind::started, 0, protocol::Phase::tense});
    record(now, RecordKind::session_started, 0);
  }

  void cancel(std::uint64_t now)
  {
    if (s_.mode == Mode::sensing) {
      return;
    }
    if (s_.mode == Mode::training) {
      const auto & ses = *s_.session;
      message(now, protocol::SessionEvent{now, protocol::SessionKind::cancelled,
          static_cast<std::uint8_t>(ses.step_index), wire_phase(ses.phase)});
      record(now, RecordKind::session_cancelled, 0);
      s_.session.reset();
    }
    s_.mode = Mode::sensing;
    set_level(now, static_cast<std::uint32_t>(std::floor(cfg_.cancel_reset_fraction * cfg_.a_max)));
  }

  void toggle_silent(std::uint64_t now)
  {
    s_.silent = !s_.silent;
    message(now, protocol::SilentMode{now, s_.silent});
    record(now, s_.silent ? RecordKind::silent_on : RecordKind::silent_off, 0);
  }

private:
  void set_level(std::uint64_t t, std::uint32_t v)
  {
    s_.accumulator = v;
    s_.decay_anchor_ms = t;
    s_.decay_anchor_value = v;
    level_update(t);
  }

  void level_update(std::uint64_t t)
  {
    message(t, protocol::LevelUpdate{t, static_cast<std::uint16_t>(s_.accumulator),
        static_cast<std::uint8_t>(led_level(s_.accumulator, cfg_))});
    record(t, RecordKind::level, static_cast<std::uint16_t>(s_.accumulator));
  }

  void message(std::uint64_t t, protocol::Message m)
  {
    out_.push_back(Output{t, std::move(m)});
  }

  void record(std::uint64_t t, RecordKind kind, std::uint16_t value)
  {
    out_.push_back(Output{t, HistoryRecord{t, kind, value}});
  }

  DeviceState & s_;
  std::vector<Output> & out_;
  const DeviceConfig & cfg_;
};

}  // namespace detail

/**
 * Applies one event to the device.
 *
 * Time first moves forward to the event (session boundaries or decay), then
 * the event itself is applied. Protocol messages and history records come
 * out in the order they happen; LED and LCD frames follow, and only when the
 * rendered value changed. Events that do not apply in the current mode
 * (Start while Sensing, Cancel while Sensing) have no effect.
 */
inline StepResult step(const DeviceState & in, const Event & ev, const DeviceConfig & cfg)
{
  StepResult r{in, {}};
  auto & s = r.state;
  const auto now = std::max(time_of(ev), in.last_tick_ms);
  const auto [led_before, lcd_before] = render(in, cfg);

  detail::Machine m(s, r.outputs, cfg);
  m.progress(now);

  const auto on_start = [&] {m.start(now);};
  const auto on_cancel = [&] {m.cancel(now);};
  const auto on_silent = [&] {m.toggle_silent(now);};

  if (const auto * p = std::get_if<PressureSample>(&ev)) {
    m.sample(PressureSample{now, p->pressure});
  } else if (const auto * b = std::get_if<ButtonPress>(&ev)) {
    switch (b->button) {
      case Button::start: on_start(); break;
      case Button::cancel: on_cancel(); break;
      case Button::silent: on_silent(); break;
    }
  } else if (const auto * c = std::get_if<AppCommand>(&ev)) {
    switch (c->cmd) {
      case protocol::CommandCode::start_training: on_start(); break;
      case protocol::CommandCode::cancel_training: on_cancel(); break;
      case protocol::CommandCode::toggle_silent: on_silent(); break;
    }
  }
  s.last_tick_ms = now;

  auto [led_after, lcd_after] = render(s, cfg);
  if (led_after != led_before) {
    r.outputs.push_back(Output{now, std::move(led_after)});
  }
  if (lcd_after != lcd_before) {
    r.outputs.push_back(Output{now, std::move(lcd_after)});
  }
  return r;
}

}  // namespace selfassist::device
