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

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace selfassist
{

// Wire values are the enumerator order; do not reorder.
enum class RecordKind : std::uint8_t
{
  level = 0,
  squeeze,
  prompt,
  session_started,
  session_completed,
  session_cancelled,
  silent_on,
  silent_off,
};

inline constexpr std::size_t kRecordKindCount = 8;

inline constexpr std::array<std::string_view, kRecordKindCount> kRecordKindNames = {
  "level", "squeeze", "prompt", "session_started",
  "session_completed", "session_cancelled", "silent_on", "silent_off",
};

constexpr std::string_view to_string(RecordKind k)
{
  return kRecordKindNames[static_cast<std::size_t>(k)];
}

inline std::optional<RecordKind> record_kind_from_string(std::string_view s)
{
  for (std::size_t i = 0; i < kRecordKindCount; ++i) {
    if (kRecordKindNames[i] == s) {
      return static_cast<RecordKind>(i);
    }
  }
  return std::nullopt;
}

constexpr bool valid(RecordKind k)
{
  return static_cast<std::size_t>(k) < kRecordKindCount;
}

/// One persisted history entry. `value` is the accumulator for level records,
/// the peak for squeeze records and 0 otherwise.
struct HistoryRecord
{
  std::uint64_t t_ms = 0;
  RecordKind kind = RecordKind::level;
  std::uint16_t value = 0;

  friend bool operator==(const HistoryRecord &, const HistoryRecord &) = default;
};

}  // namespace selfassist
