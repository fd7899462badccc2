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
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "selfassist/config.hpp"
#include "selfassist/pmr.hpp"
#include "selfassist/record.hpp"

// History file: one record per line, `t_ms,kind,value\n`, kind spelled out
// (level, squeeze, ...). Appends only.

namespace selfassist::history
{

class HistoryError : public std::runtime_error
{
public:
  enum class Code { io, corrupt_record };

  HistoryError(Code code, const std::string & what, std::size_t line = 0, std::uint64_t position = 0)
  : std::runtime_error(what), code_(code), line_(line), position_(position) {}

  Code code() const noexcept {return code_;}
  std::size_t line() const noexcept {return line_;}
  std::uint64_t position() const noexcept {return position_;}

private:
  Code code_;
  std::size_t line_;
  std::uint64_t position_;
};

inline std::string format_record(const HistoryRecord & r)
{
  return std::to_string(r.t_ms) + "," + std::string(to_string(r.kind)) + "," + std::to_string(r.value);
}

inline std::optional<HistoryRecord> parse_record(std::string_view line)
{
  const auto c1 = line.find(',');
  if (c1 == std::string_view::npos) {
    return std::nullopt;
  }
  const auto c2 = line.find(',', c1 + 1);
  if (c2 == std::string_view::npos) {
    return std::nullopt;
  }
  const auto t = pmr::detail::parse_int(line.substr(0, c1));
  const auto kind = record_kind_from_string(line.substr(c1 + 1, c2 - c1 - 1));
  const auto value = pmr::detail::parse_int(line.substr(c2 + 1));
  if (!t || *t < 0 || !kind || !value || *value < 0 || *value > 0xFFFF) {
    return std::nullopt;
  }
  return HistoryRecord{static_cast<std::uint64_t>(*t), *kind, static_cast<std::uint16_t>(*value)};
}

/// Half-open [from_ms, to_ms), append order preserved.
inline std::vector<HistoryRecord> query_range(
  std::span<const HistoryRecord> records, std::uint64_t from_ms, std::uint64_t to_ms)
{
  std::vector<HistoryRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
    [&](const HistoryRecord & r) {return r.t_ms >= from_ms && r.t_ms < to_ms;});
  return out;
}

/**
 * Append-only record store, optionally backed by a file.
 *
 * A store without a path lives in memory only. With a path, every append is
 * written through (flushed per append unless the batch policy is chosen).
 */
class Store
{
public:
  Store() = default;

  /// Loads `path` (absent file means empty). A torn final line, i.e. one
  /// without its newline, is dropped and reported through warning().
  static Store load(const std::filesystem::path & path, FlushPolicy flush = FlushPolicy::per_append)
  {
    Store store;
    store.path_ = path;
    store.flush_ = flush;

    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) {
      return store;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      throw HistoryError(HistoryError::Code::io, "cannot read " + path.string());
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
      const auto nl = text.find('\n', pos);
      ++line_no;
      if (nl == std::string::npos) {
        store.warning_ = path.string() + ": ignoring torn final line " + std::to_string(line_no) +
          " (" + std::to_string(text.size() - pos) + " bytes)";
        break;
      }
      auto line = std::string_view(text).substr(pos, nl - pos);
      if (!line.empty() && line.back() == '\r') {
        line.remove_suffix(1);
      }
      const auto rec = parse_record(line);
      if (!rec) {
        throw HistoryError(HistoryError::Code::corrupt_record,
          path.string() + ": corrupt record at line " + std::to_string(line_no), line_no, pos);
      }
      store.records_.push_back(*rec);
      pos = nl + 1;
    }
    store.good_size_ = pos;
    store.torn_ = pos < text.size();
    return store;
  }

  Store(Store &&) = default;
  Store & operator=(Store &&) = default;

  ~Store()
  {
    if (out_.is_open()) {
      out_.flush();
    }
  }

  void append(const HistoryRecord & r)
  {
    if (path_) {
      write(r);
    }
    records_.push_back(r);
  }

  void flush()
  {
    if (out_.is_open() && !out_.flush()) {
      throw HistoryError(HistoryError::Code::io, "flush failed on " + path_->string(), 0, good_size_);
    }
  }

  const std::vector<HistoryRecord> & records() const {return records_;}

  std::vector<HistoryRecord> query_range(std::uint64_t from_ms, std::uint64_t to_ms) const
  {
    return history::query_range(records_, from_ms, to_ms);
  }

  const std::optional<std::string> & warning() const {return warning_;}
  const std::optional<std::filesystem::path> & path() const {return path_;}

private:
  void write(const HistoryRecord & r)
  {
    if (!out_.is_open()) {
      if (torn_) {
        std::error_code ec;
        std::filesystem::resize_file(*path_, good_size_, ec);
        if (ec) {
          throw HistoryError(HistoryError::Code::io,
            "cannot trim torn tail of " + path_->string() + ": " + ec.message(), 0, good_size_);
        }
        torn_ = false;
      }
      out_.open(*path_, std::ios::binary | std::ios::app);
      if (!out_) {
        throw HistoryError(HistoryError::Code::io, "cannot open " + path_->string() + " for append",
          0, good_size_);
      }
    }
    const auto line = format_record(r) + "\n";
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    if (flush_ == FlushPolicy::per_append) {
      out_.flush();
    }
    if (!out_) {
      throw HistoryError(HistoryError::Code::io, "write failed on " + path_->string(), 0, good_size_);
    }
    good_size_ += line.size();
  }

  std::vector<HistoryRecord> records_;
  std::optional<std::filesystem::path> path_;
  FlushPolicy flush_ = FlushPolicy::per_append;
  std::ofstream out_;
  std::uint64_t good_size_ = 0;
  bool torn_ = false;
  std::optional<std::string> warning_;
};

inline constexpr std::uint64_t kDayMs = 86'400'000;

/// UTC calendar date, YYYY-MM-DD.
inline std::string utc_day(std::uint64_t t_ms)
{
  using namespace std::chrono;
  const sys_days day{days{static_cast<days::rep>(t_ms / kDayMs)}};
  const year_month_day ymd{day};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u",
    static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

struct DayAggregate
{
  std::string day;
  double mean_level = 0.0;
  std::uint16_t max_level = 0;
  std::uint64_t level_count = 0;
  std::uint64_t squeeze_count = 0;
  std::uint64_t sessions_completed = 0;

  friend bool operator==(const DayAggregate &, const DayAggregate &) = default;
};

/// Buckets by UTC day, ascending. Days with no level records report 0 for
/// mean and max.
inline std::vector<DayAggregate> aggregate_daily(std::span<const HistoryRecord> records)
{
  struct Acc
  {
    std::uint64_t sum = 0;
    DayAggregate agg;
  };
  std::map<std::uint64_t, Acc> days;
  for (const auto & r : records) {
    auto & a = days[r.t_ms / kDayMs];
    switch (r.kind) {
      case RecordKind::level:
        a.sum += r.value;
        a.agg.max_level = std::max(a.agg.max_level, r.value);
        ++a.agg.level_count;
        break;
      case RecordKind::squeeze:
        ++a.agg.squeeze_count;
        break;
      case RecordKind::session_completed:
        ++a.agg.sessions_completed;
        break;
      default:
        break;
    }
  }
  std::vector<DayAggregate> out;
  out.reserve(days.size());
  for (auto & [day, a] : days) {
    a.agg.day = utc_day(day * kDayMs);
    if (a.agg.level_count > 0) {
      a.agg.mean_level = static_cast<double>(a.sum) / static_cast<double>(a.agg.level_count);
    }
    out.push_back(std::move(a.agg));
  }
  return out;
}

}  // namespace selfassist::history
