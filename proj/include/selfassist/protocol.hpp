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
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "selfassist/record.hpp"

// Frame layout (all integers little-endian):
//
//   0xA5 | type u8 | len u16 | payload[len] | crc u16
//
// crc is CRC-16/CCITT-FALSE over type, len and payload. len <= 1024.

namespace selfassist::protocol
{

inline constexpr std::uint8_t kSync = 0xA5;
inline constexpr std::size_t kMaxPayload = 1024;
inline constexpr std::size_t kHeaderSize = 4;
inline constexpr std::size_t kOverhead = kHeaderSize + 2;
inline constexpr std::size_t kRecordWireSize = 11;
/// Records that fit in one HistoryResponse payload.
inline constexpr std::size_t kMaxRecordsPerResponse = (kMaxPayload - 2) / kRecordWireSize;

namespace detail
{

constexpr std::array<std::uint16_t, 256> make_crc_table()
{
  std::array<std::uint16_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint16_t crc = static_cast<std::uint16_t>(i << 8);
    for (int bit = 0; bit < 8; ++bit) {
      crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021)
                           : static_cast<std::uint16_t>(crc << 1);
    }
    table[i] = crc;
  }
  return table;
}

inline constexpr auto kCrcTable = make_crc_table();

}  // namespace detail

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no final xor.
class Crc16
{
public:
  static constexpr std::uint16_t kInit = 0xFFFF;

  void update(std::uint8_t byte)
  {
    crc_ = static_cast<std::uint16_t>((crc_ << 8) ^ detail::kCrcTable[((crc_ >> 8) ^ byte) & 0xFF]);
  }

  void update(std::span<const std::uint8_t> bytes)
  {
    for (auto b : bytes) {
      update(b);
    }
  }

  std::uint16_t value() const {return crc_;}

private:
  std::uint16_t crc_ = kInit;
};

inline std::uint16_t crc16(std::span<const std::uint8_t> bytes)
{
  Crc16 crc;
  crc.update(bytes);
  return crc.value();
}

enum class MsgType : std::uint8_t
{
  level_update = 0x01,
  squeeze = 0x02,
  training_prompt = 0x03,
  session_event = 0x04,
  silent_mode = 0x05,
  command = 0x10,
  history_request = 0x11,
  history_response = 0x12,
};

enum class SessionKind : std::uint8_t { started = 0, step_advanced, phase_changed, completed, cancelled };
enum class Phase : std::uint8_t { tense = 0, relax = 1 };
enum class CommandCode : std::uint8_t { start_training = 0, cancel_training, toggle_silent };

struct LevelUpdate
{
  std::uint64_t t_ms = 0;
  std::uint16_t accumulator = 0;
  std::uint8_t led_level = 0;
  friend bool operator==(const LevelUpdate &, const LevelUpdate &) = default;
};

struct Squeeze
{
  std::uint64_t t_ms = 0;
  std::uint16_t peak = 0;
  std::uint16_t duration_ms = 0;
  friend bool operator==(const Squeeze &, const Squeeze &) = default;
};

struct TrainingPrompt
{
  std::uint64_t t_ms = 0;
  friend bool operator==(const TrainingPrompt &, const TrainingPrompt &) = default;
};

struct SessionEvent
{
  std::uint64_t t_ms = 0;
  SessionKind kind = SessionKind::started;
  std::uint8_t step = 0;
  Phase phase = Phase::tense;
  friend bool operator==(const SessionEvent &, const SessionEvent &) = default;
};

struct SilentMode
{
  std::uint64_t t_ms = 0;
  bool on = false;
  friend bool operator==(const SilentMode &, const SilentMode &) = default;
};

struct Command
{
  CommandCode cmd = CommandCode::start_training;
  friend bool operator==(const Command &, const Command &) = default;
};

struct HistoryRequest
{
  std::uint64_t from_ms = 0;
  std::uint64_t to_ms = 0;
  friend bool operator==(const HistoryRequest &, const HistoryRequest &) = default;
};

/// The count field on the wire is records.size().
struct HistoryResponse
{
  std::vector<HistoryRecord> records;
  friend bool operator==(const HistoryResponse &, const HistoryResponse &) = default;
};

using Message = std::variant<
  LevelUpdate, Squeeze, TrainingPrompt, SessionEvent, SilentMode,
  Command, HistoryRequest, HistoryResponse>;

inline MsgType type_of(const Message & m)
{
  static constexpr std::array<MsgType, 8> kTypes = {
    MsgType::level_update, MsgType::squeeze, MsgType::training_prompt,
    MsgType::session_event, MsgType::silent_mode, MsgType::command,
    MsgType::history_request, MsgType::history_response,
  };
  return kTypes[m.index()];
}

class EncodeError : public std::runtime_error
{
public:
  enum class Code { oversize, range };

  EncodeError(Code code, const std::string & what)
  : std::runtime_error(what), code_(code) {}

  Code code() const noexcept {return code_;}

private:
  Code code_;
};

namespace detail
{

class Writer
{
public:
  explicit Writer(std::vector<std::uint8_t> & out) : out_(out) {}

  void u8(std::uint8_t v) {out_.push_back(v);}
  void u16(std::uint16_t v)
  {
    out_.push_back(static_cast<std::uint8_t>(v));
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u64(std::uint64_t v)
  {
    for (int i = 0; i < 8; ++i) {
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }

private:
  std::vector<std::uint8_t> & out_;
};

class Reader
{
public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  bool ok() const {return ok_;}
  bool at_end() const {return pos_ == in_.size();}

  std::uint8_t u8()
  {
    if (!need(1)) {return 0;}
    return in_[pos_++];
  }
  std::uint16_t u16()
  {
    if (!need(2)) {return 0;}
    const auto v = static_cast<std::uint16_t>(in_[pos_] | (in_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint64_t u64()
  {
    if (!need(8)) {return 0;}
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

private:
  bool need(std::size_t n)
  {
    if (pos_ + n > in_.size()) {
      ok_ = false;
      return false;
    }
    return true;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  bool ok_ = true;
};

inline void check_range(bool ok, const char * what)
{
  if (!ok) {
    throw EncodeError(EncodeError::Code::range, what);
  }
}

struct PayloadWriter
{
  Writer & w;

  void operator()(const LevelUpdate & m) {w.u64(m.t_ms); w.u16(m.accumulator); w.u8(m.led_level);}
  void operator()(const Squeeze & m) {w.u64(m.t_ms); w.u16(m.peak); w.u16(m.duration_ms);}
  void operator()(const TrainingPrompt & m) {w.u64(m.t_ms);}
  void operator()(const SessionEvent & m)
  {
    check_range(static_cast<std::uint8_t>(m.kind) <= 4, "SessionEvent.kind out of range");
    check_range(static_cast<std::uint8_t>(m.phase) <= 1, "SessionEvent.phase out of range");
    w.u64(m.t_ms);
    w.u8(static_cast<std::uint8_t>(m.kind));
    w.u8(m.step);
    w.u8(static_cast<std::uint8_t>(m.phase));
  }
  void operator()(const SilentMode & m) {w.u64(m.t_ms); w.u8(m.on ? 1 : 0);}
  void operator()(const Command & m)
  {
    check_range(static_cast<std::uint8_t>(m.cmd) <= 2, "Command.cmd out of range");
    w.u8(static_cast<std::uint8_t>(m.cmd));
  }
  void operator()(const HistoryRequest & m) {w.u64(m.from_ms); w.u64(m.to_ms);}
  void operator()(const HistoryResponse & m)
  {
    if (m.records.size() > 0xFFFF) {
      throw EncodeError(EncodeError::Code::oversize, "HistoryResponse count exceeds u16");
    }
    w.u16(static_cast<std::uint16_t>(m.records.size()));
    for (const auto & r : m.records) {
      check_range(valid(r.kind), "history record kind out of range");
      w.u64(r.t_ms);
      w.u8(static_cast<std::uint8_t>(r.kind));
      w.u16(r.value);
    }
  }
};

}  // namespace detail

/// Serializes `m` into one complete frame.
inline std::vector<std::uint8_t> encode(const Message & m)
{
  std::vector<std::uint8_t> payload;
  detail::Writer pw(payload);
  std::visit(detail::PayloadWriter{pw}, m);
  if (payload.size() > kMaxPayload) {
    throw EncodeError(EncodeError::Code::oversize,
      "payload of " + std::to_string(payload.size()) + " bytes exceeds 1024");
  }

  std::vector<std::uint8_t> frame;
  frame.reserve(payload.size() + kOverhead);
  detail::Writer fw(frame);
  fw.u8(kSync);
  fw.u8(static_cast<std::uint8_t>(type_of(m)));
  fw.u16(static_cast<std::uint16_t>(payload.size()));
  frame.insert(frame.end(), payload.begin(), payload.end());
  fw.u16(crc16(std::span(frame).subspan(1)));
  return frame;
}

/// Splits records into responses that each fit in one frame.
inline std::vector<HistoryResponse> chunk_history(std::span<const HistoryRecord> records)
{
  std::vector<HistoryResponse> out;
  for (std::size_t i = 0; i < records.size(); i += kMaxRecordsPerResponse) {
    const auto n = std::min(kMaxRecordsPerResponse, records.size() - i);
    auto part = records.subspan(i, n);
    out.push_back(HistoryResponse{{part.begin(), part.end()}});
  }
  if (out.empty()) {
    out.emplace_back();
  }
  return out;
}

enum class DiagnosticKind
{
  bad_sync,      // bytes skipped while looking for 0xA5
  bad_length,    // header length above 1024
  crc_mismatch,
  bad_type,      // CRC-valid frame with an unknown type byte
  bad_payload,   // CRC-valid frame whose payload does not parse for its type
  truncated,     // stream ended inside a frame
};

struct Diagnostic
{
  DiagnosticKind kind;
  /// Stream offset of the first byte concerned.
  std::uint64_t offset;
  friend bool operator==(const Diagnostic &, const Diagnostic &) = default;
};

struct DecodeOutput
{
  std::vector<Message> messages;
  std::vector<Diagnostic> diagnostics;
};

/// Parses a CRC-valid payload. Returns false on a malformed payload.
inline bool parse_payload(std::uint8_t type, std::span<const std::uint8_t> payload, Message & out)
{
  detail::Reader r(payload);
  switch (static_cast<MsgType>(type)) {
    case MsgType::level_update: {
      LevelUpdate m;
      m.t_ms = r.u64(); m.accumulator = r.u16(); m.led_level = r.u8();
      out = m;
      break;
    }
    case MsgType::squeeze: {
      Squeeze m;
      m.t_ms = r.u64(); m.peak = r.u16(); m.duration_ms = r.u16();
      out = m;
      break;
    }
    case MsgType::training_prompt:
      out = TrainingPrompt{r.u64()};
      break;
    case MsgType::session_event: {
      SessionEvent m;
      m.t_ms = r.u64();
      const auto kind = r.u8();
      m.step = r.u8();
      const auto phase = r.u8();
      if (kind > 4 || phase > 1) {
        return false;
      }
      m.kind = static_cast<SessionKind>(kind);
      m.phase = static_cast<Phase>(phase);
      out = m;
      break;
    }
    case MsgType::silent_mode: {
      SilentMode m;
      m.t_ms = r.u64();
      const auto on = r.u8();
      if (on > 1) {
        return false;
      }
      m.on = on == 1;
      out = m;
      break;
    }
    case MsgType::command: {
      const auto cmd = r.u8();
      if (cmd > 2) {
        return false;
      }
      out = Command{static_cast<CommandCode>(cmd)};
      break;
    }
    case MsgType::history_request: {
      HistoryRequest m;
      m.from_ms = r.u64(); m.to_ms = r.u64();
      out = m;
      break;
    }
    case MsgType::history_response: {
      const auto count = r.u16();
      if (payload.size() != 2 + std::size_t{count} * kRecordWireSize) {
        return false;
      }
      HistoryResponse m;
      m.records.reserve(count);
      for (std::size_t i = 0; i < count; ++i) {
        HistoryRecord rec;
        rec.t_ms = r.u64();
        const auto kind = r.u8();
        rec.value = r.u16();
        rec.kind = static_cast<RecordKind>(kind);
        if (!valid(rec.kind)) {
          return false;
        }
        m.records.push_back(rec);
      }
      out = std::move(m);
      break;
    }
    default:
      return false;
  }
  return r.ok() && r.at_end();
}

inline bool known_type(std::uint8_t type)
{
  return (type >= 0x01 && type <= 0x05) || (type >= 0x10 && type <= 0x12);
}

/**
 * Incremental frame decoder.
 *
 * Accepts arbitrary chunks; the decoded messages and diagnostics depend only
 * on the concatenated byte stream, never on where it was split. After a
 * rejected frame the decoder drops the sync byte and rescans, so a frame
 * embedded in damaged bytes is still found. At most one frame (1030 bytes)
 * is ever retained.
 */
class Decoder
{
public:
  DecodeOutput push(std::span<const std::uint8_t> bytes)
  {
    DecodeOutput out;
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
    scan(out);
    compact();
    return out;
  }

  /// Signals end of stream. A frame that can no longer complete is reported
  /// as truncated and the bytes after its sync byte are scanned again.
  DecodeOutput finish()
  {
    DecodeOutput out;
    while (head_ < buf_.size()) {
      out.diagnostics.push_back({DiagnosticKind::truncated, offset_});
      after_reject_ = true;
      drop(1);
      scan(out);
    }
    buf_.clear();
    head_ = 0;
    skipping_ = false;
    after_reject_ = false;
    return out;
  }

  std::size_t buffered() const {return buf_.size() - head_;}

private:
  void drop(std::size_t n)
  {
    head_ += n;
    offset_ += n;
  }

  void scan(DecodeOutput & out)
  {
    while (head_ < buf_.size()) {
      const auto avail = buf_.size() - head_;
      const auto * p = buf_.data() + head_;

      if (p[0] != kSync) {
        if (!skipping_ && !after_reject_) {
          out.diagnostics.push_back({DiagnosticKind::bad_sync, offset_});
        }
        skipping_ = true;
        std::size_t n = 1;
        while (n < avail && p[n] != kSync) {
          ++n;
        }
        drop(n);
        continue;
      }
      skipping_ = false;

      if (avail < kHeaderSize) {
        return;
      }
      const std::size_t len = p[2] | (p[3] << 8);
      if (len > kMaxPayload) {
        reject(out, DiagnosticKind::bad_length);
        continue;
      }
      const auto frame_size = len + kOverhead;
      if (avail < frame_size) {
        return;
      }
      const auto body = std::span<const std::uint8_t>(p + 1, kHeaderSize - 1 + len);
      const std::uint16_t want = static_cast<std::uint16_t>(p[4 + len] | (p[5 + len] << 8));
      if (crc16(body) != want) {
        reject(out, DiagnosticKind::crc_mismatch);
        continue;
      }

      after_reject_ = false;
      const auto type = p[1];
      Message m;
      if (!known_type(type)) {
        out.diagnostics.push_back({DiagnosticKind::bad_type, offset_});
      } else if (!parse_payload(type, std::span(p + kHeaderSize, len), m)) {
        out.diagnostics.push_back({DiagnosticKind::bad_payload, offset_});
      } else {
        out.messages.push_back(std::move(m));
      }
      drop(frame_size);
    }
  }

  void reject(DecodeOutput & out, DiagnosticKind kind)
  {
    out.diagnostics.push_back({kind, offset_});
    after_reject_ = true;
    drop(1);
  }

  void compact()
  {
    if (head_ == buf_.size()) {
      buf_.clear();
      head_ = 0;
    } else if (head_ > 0) {
      buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(head_));
      head_ = 0;
    }
  }

  std::vector<std::uint8_t> buf_;
  std::size_t head_ = 0;
  std::uint64_t offset_ = 0;
  bool skipping_ = false;
  // Garbage following a rejected frame is part of that frame; not re-reported.
  bool after_reject_ = false;
};

/// One-shot decode of a complete stream, including end-of-stream handling.
inline DecodeOutput decode_all(std::span<const std::uint8_t> bytes)
{
  Decoder d;
  auto out = d.push(bytes);
  auto tail = d.finish();
  out.messages.insert(out.messages.end(), tail.messages.begin(), tail.messages.end());
  out.diagnostics.insert(out.diagnostics.end(), tail.diagnostics.begin(), tail.diagnostics.end());
  return out;
}

}  // namespace selfassist::protocol
