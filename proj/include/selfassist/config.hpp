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
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "selfassist/pmr.hpp"

namespace selfassist
{

class ConfigError : public std::runtime_error
{
public:
  explicit ConfigError(const std::string & what, std::size_t line = 0)
  : std::runtime_error(line ? "config line " + std::to_string(line) + ": " + what : what),
    line_(line) {}

  std::size_t line() const noexcept {return line_;}

private:
  std::size_t line_;
};

/// Device tunables. Pressures are 10-bit ADC counts; accumulator values are
/// abstract units in [0, a_max].
struct DeviceConfig
{
  std::uint32_t p_hi = 300;
  std::uint32_t p_lo = 150;
  std::uint32_t a_max = 1000;
  std::uint32_t delta_min = 10;
  std::uint32_t delta_max = 100;
  std::uint32_t led_count = 8;
  std::uint64_t tick_ms = 10;
  std::uint64_t decay_half_life_ms = 0;
  double cancel_reset_fraction = 0.5;
  std::shared_ptr<const pmr::Plan> plan = std::make_shared<const pmr::Plan>(pmr::default_plan());

  void validate() const
  {
    if (!(p_lo < p_hi && p_hi <= 1023)) {
      throw ConfigError("require p_lo < p_hi <= 1023");
    }
    if (!(0 < delta_min && delta_min <= delta_max && delta_max <= a_max)) {
      throw ConfigError("require 0 < delta_min <= delta_max <= a_max");
    }
    if (a_max > 0xFFFF) {
      throw ConfigError("a_max must fit in 16 bits");
    }
    if (led_count < 1 || led_count > 255) {
      throw ConfigError("led_count must be in [1, 255]");
    }
    if (tick_ms < 1) {
      throw ConfigError("tick_ms must be >= 1");
    }
    if (!(cancel_reset_fraction >= 0.0 && cancel_reset_fraction <= 1.0)) {
      throw ConfigError("cancel_reset_fraction must be in [0, 1]");
    }
    if (!plan) {
      throw ConfigError("missing plan");
    }
    try {
      pmr::validate_plan(*plan);
    } catch (const pmr::PlanError & e) {
      throw ConfigError(std::string("invalid plan: ") + e.what());
    }
  }
};

enum class FlushPolicy { per_append, batch };

/// Everything a config file can carry: the device tunables plus host paths.
struct SimConfig
{
  DeviceConfig device;
  std::optional<std::filesystem::path> plan_path;
  std::optional<std::filesystem::path> history_path;
  FlushPolicy history_flush = FlushPolicy::per_append;
  /// Wall-clock time of device boot, added to history timestamps.
  std::uint64_t epoch_ms = 0;
};

namespace detail
{

template<typename T>
T parse_unsigned(std::string_view key, std::string_view v, std::size_t line)
{
  const auto n = pmr::detail::parse_int(v);
  if (!n || *n < 0 || static_cast<std::uint64_t>(*n) > std::numeric_limits<T>::max()) {
    throw ConfigError("bad value for " + std::string(key) + ": '" + std::string(v) + "'", line);
  }
  return static_cast<T>(*n);
}

inline double parse_double(std::string_view key, std::string_view v, std::size_t line)
{
  try {
    std::size_t used = 0;
    const std::string s(v);
    const double d = std::stod(s, &used);
    if (used != s.size()) {
      throw std::invalid_argument("trailing");
    }
    return d;
  } catch (const std::logic_error &) {
    throw ConfigError("bad value for " + std::string(key) + ": '" + std::string(v) + "'", line);
  }
}

inline std::string read_file(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

/**
 * Parses `key = value` lines. `#` starts a comment. Unknown keys are errors.
 * Relative paths are resolved against `base_dir`. The plan file, when named,
 * is loaded here so the returned config is complete.
 */
inline SimConfig parse_config(std::string_view text, const std::filesystem::path & base_dir = {})
{
  SimConfig cfg;
  auto & d = cfg.device;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      nl = text.size();
    }
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = pmr::detail::trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("expected 'key = value'", line_no);
    }
    const auto key = pmr::detail::trim(line.substr(0, eq));
    const auto value = pmr::detail::trim(line.substr(eq + 1));
    const auto resolve = [&](std::string_view v) {
        std::filesystem::path p{std::string(v)};
        return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
      };

    if (key == "p_hi") {
      d.p_hi = detail::parse_unsigned<std::uint32_t>(key, value, line_no);
    } else if (key == "p_lo") {
      d.p_lo = detail::parse_unsigned<std::uint32_t>(key, value, line_no);
    } else if (key == "a_max") {
      d.a_max = detail::parse_unsigned<std::uint32_t>(key, value, line_no);
    } else if (key == "delta_min") {
      d.delta_min = detail::parse_unsigned<std::uint32_t>(key, value, line_no);
    } else if (key == "delta_max") {
      d.delta_max = detail::parse_unsigned<std::uint32_t>(key, value, line_no);
    } else if (key == "led_count") {
      d.led_count = detail::parse_unsigned<std::uint32_t>(key, value, line_no);
    } else if (key == "tick_ms") {
      d.tick_ms = detail::parse_unsigned<std::uint64_t>(key, value, line_no);
    } else if (key == "decay_half_life_ms") {
      d.decay_half_life_ms = detail::parse_unsigned<std::uint64_t>(key, value, line_no);
    } else if (key == "cancel_reset_fraction") {
      d.cancel_reset_fraction = detail::parse_double(key, value, line_no);
    } else if (key == "plan_path") {
      cfg.plan_path = resolve(value);
    } else if (key == "history_path") {
      cfg.history_path = resolve(value);
    } else if (key == "history_flush") {
      if (value == "per_append") {
        cfg.history_flush = FlushPolicy::per_append;
      } else if (value == "batch") {
        cfg.history_flush = FlushPolicy::batch;
      } else {
        throw ConfigError("history_flush must be per_append or batch", line_no);
      }
    } else if (key == "epoch_ms") {
      cfg.epoch_ms = detail::parse_unsigned<std::uint64_t>(key, value, line_no);
    } else {
      throw ConfigError("unknown key '" + std::string(key) + "'", line_no);
    }
  }

  if (cfg.plan_path) {
    try {
      d.plan = std::make_shared<const pmr::Plan>(pmr::load_plan(detail::read_file(*cfg.plan_path)));
    } catch (const pmr::PlanError & e) {
      throw ConfigError(cfg.plan_path->string() + ": " + e.what());
    }
  }
  d.validate();
  return cfg;
}

inline SimConfig load_config(const std::filesystem::path & path)
{
  return parse_config(detail::read_file(path), path.parent_path());
}

}  // namespace selfassist
