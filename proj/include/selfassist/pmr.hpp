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
#include <charconv>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace selfassist::pmr
{

/// Maximum LCD line width; instructions longer than this cannot be shown.
inline constexpr std::size_t kLcdWidth = 32;
/// Step indices travel as a single byte on the wire.
inline constexpr std::size_t kMaxSteps = 255;

struct Step
{
  std::string muscle_group;
  std::string instruction;
  std::uint64_t tense_ms = 0;
  std::uint64_t relax_ms = 0;

  friend bool operator==(const Step &, const Step &) = default;
};

struct Plan
{
  std::string name;
  std::vector<Step> steps;

  std::uint64_t total_ms() const
  {
    std::uint64_t total = 0;
    for (const auto & s : steps) {
      total += s.tense_ms + s.relax_ms;
    }
    return total;
  }

  friend bool operator==(const Plan &, const Plan &) = default;
};

enum class Phase : std::uint8_t { tense = 0, relax = 1 };

class PlanError : public std::runtime_error
{
public:
  enum class Code { empty_plan, bad_duration, oversize_instruction, malformed_line };

  PlanError(Code code, std::size_t line, const std::string & what)
  : std::runtime_error(
      line ? "plan line " + std::to_string(line) + ": " + what : what),
    code_(code), line_(line) {}

  Code code() const noexcept {return code_;}
  std::size_t line() const noexcept {return line_;}

private:
  Code code_;
  std::size_t line_;
};

namespace detail
{

inline std::string_view trim(std::string_view s)
{
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline bool printable_ascii(std::string_view s)
{
  return std::all_of(s.begin(), s.end(), [](char c) {return c >= 0x20 && c <= 0x7e;});
}

inline std::optional<std::int64_t> parse_int(std::string_view s)
{
  std::int64_t v = 0;
  const auto * end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || p != end) {
    return std::nullopt;
  }
  return v;
}

}  // namespace detail

/// Validates one step; `line` is only used for error messages.
inline void validate_step(const Step & step, std::size_t line = 0)
{
  using Code = PlanError::Code;
  if (step.tense_ms == 0 || step.relax_ms == 0) {
    throw PlanError(Code::bad_duration, line, "durations must be positive");
  }
  if (step.instruction.empty()) {
    throw PlanError(Code::malformed_line, line, "empty instruction");
  }
  if (step.instruction.size() > kLcdWidth) {
    throw PlanError(Code::oversize_instruction, line,
      "instruction longer than " + std::to_string(kLcdWidth) + " characters");
  }
  if (!detail::printable_ascii(step.instruction) || !detail::printable_ascii(step.muscle_group)) {
    throw PlanError(Code::malformed_line, line, "non-printable characters");
  }
}

inline void validate_plan(const Plan & plan)
{
  if (plan.steps.empty()) {
    throw PlanError(PlanError::Code::empty_plan, 0, "plan has no steps");
  }
  if (plan.steps.size() > kMaxSteps) {
    throw PlanError(PlanError::Code::malformed_line, 0, "plan has more than 255 steps");
  }
  for (const auto & s : plan.steps) {
    validate_step(s);
  }
}

/**
 * Parses a plan file.
 *
 * One step per line as `muscle_group | instruction | tense_ms | relax_ms`.
 * Blank lines and `#` comments are skipped. The first meaningful line may be
 * `name: <text>`.
 */
inline Plan load_plan(std::string_view text)
{
  using Code = PlanError::Code;
  Plan plan;
  bool seen_content = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      nl = text.size();
    }
    const auto raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;

    auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') {
      continue;
    }
    if (!seen_content && line.substr(0, 5) == "name:") {
      plan.name = std::string(detail::trim(line.substr(5)));
      seen_content = true;
      continue;
    }
    seen_content = true;

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const auto bar = line.find('|', start);
      fields.push_back(detail::trim(line.substr(start, bar - start)));
      if (bar == std::string_view::npos) {
        break;
      }
      start = bar + 1;
    }
    if (fields.size() != 4) {
      throw PlanError(Code::malformed_line, line_no, "expected 4 '|'-separated fields");
    }
    const auto tense = detail::parse_int(fields[2]);
    const auto relax = detail::parse_int(fields[3]);
    if (!tense || !relax) {
      throw PlanError(Code::malformed_line, line_no, "durations must be integers");
    }
    if (*tense <= 0 || *relax <= 0) {
      throw PlanError(Code::bad_duration, line_no, "durations must be positive");
    }
    Step step{std::string(fields[0]), std::string(fields[1]),
      static_cast<std::uint64_t>(*tense), static_cast<std::uint64_t>(*relax)};
    validate_step(step, line_no);
    plan.steps.push_back(std::move(step));
  }
  validate_plan(plan);
  return plan;
}

/// Seven-group abbreviated protocol, 5 s tense / 10 s relax per group.
inline Plan default_plan()
{
  Plan plan;
  plan.name = "Abbreviated 7-group PMR";
  plan.steps = {
    {"hands", "Clench both fists tightly", 5000, 10000},
    {"upper arms", "Bend elbows, tense biceps", 5000, 10000},
    {"face", "Scrunch up your whole face", 5000, 10000},
    {"neck and shoulders", "Lift shoulders to your ears", 5000, 10000},
    {"chest and belly", "Breathe in, tighten your belly", 5000, 10000},
    {"legs", "Press knees together firmly", 5000, 10000},
    {"feet", "Curl your toes downward", 5000, 10000},
  };
  return plan;
}

struct Session
{
  std::shared_ptr<const Plan> plan;
  std::uint64_t started_ms = 0;
  std::size_t step_index = 0;
  Phase phase = Phase::tense;
  std::uint64_t phase_started_ms = 0;

  const Step & step() const {return plan->steps[step_index];}

  std::uint64_t phase_duration() const
  {
    return phase == Phase::tense ? step().tense_ms : step().relax_ms;
  }

  std::uint64_t phase_end_ms() const {return phase_started_ms + phase_duration();}

  friend bool operator==(const Session &, const Session &) = default;
};

inline Session start_session(std::shared_ptr<const Plan> plan, std::uint64_t now_ms)
{
  return Session{std::move(plan), now_ms, 0, Phase::tense, now_ms};
}

inline Session start_session(const Plan & plan, std::uint64_t now_ms)
{
  return start_session(std::make_shared<const Plan>(plan), now_ms);
}

/// Line the LCD shows for the current phase.
inline std::string instruction_text(const Session & s)
{
  if (s.phase == Phase::tense) {
    return s.step().instruction;
  }
  std::string line = "Relax: " + s.step().muscle_group;
  if (line.size() > kLcdWidth) {
    line.resize(kLcdWidth);
  }
  return line;
}

struct Event
{
  enum class Kind : std::uint8_t { phase_changed, step_advanced, completed };

  Kind kind;
  std::uint64_t t_ms;
  std::size_t step_index;
  Phase phase;

  friend bool operator==(const Event &, const Event &) = default;
};

struct AdvanceResult
{
  /// Empty once the plan has completed.
  std::optional<Session> session;
  std::vector<Event> events;

  bool completed() const {return !session.has_value();}
};

/**
 * Crosses every phase boundary at or before `now_ms`.
 *
 * Boundary events carry the analytic boundary time, not `now_ms`, so the
 * event stream does not depend on how coarsely the caller ticks.
 */
inline AdvanceResult advance(Session session, std::uint64_t now_ms)
{
  AdvanceResult out;
  while (now_ms >= session.phase_end_ms()) {
    const auto boundary = session.phase_end_ms();
    if (session.phase == Phase::tense) {
      session.phase = Phase::relax;
      session.phase_started_ms = boundary;
      out.events.push_back({Event::Kind::phase_changed, boundary, session.step_index, Phase::relax});
    } else if (session.step_index + 1 == session.plan->steps.size()) {
      out.events.push_back({Event::Kind::completed, boundary, session.step_index, Phase::relax});
      return out;
    } else {
      ++session.step_index;
      session.phase = Phase::tense;
      session.phase_started_ms = boundary;
      out.events.push_back({Event::Kind::step_advanced, boundary, session.step_index, Phase::tense});
    }
  }
  out.session = std::move(session);
  return out;
}

/// floor(255 * remaining / duration) for the current phase.
inline std::uint8_t countdown_brightness(const Session & s, std::uint64_t now_ms)
{
  const auto duration = s.phase_duration();
  const auto end = s.phase_end_ms();
  const auto clamped = std::clamp(now_ms, s.phase_started_ms, end);
  const auto remaining = end - clamped;
  return static_cast<std::uint8_t>(255 * remaining / duration);
}

/// Completed steps lit, current step counting down. Plans longer than the
/// row wrap around and start a fresh row.
inline std::vector<std::uint8_t> led_pattern(
  const Session & s, std::uint64_t now_ms, std::size_t led_count)
{
  std::vector<std::uint8_t> leds(led_count, 0);
  const auto pos = s.step_index % led_count;
  std::fill_n(leds.begin(), pos, std::uint8_t{255});
  leds[pos] = countdown_brightness(s, now_ms);
  return leds;
}

}  // namespace selfassist::pmr
