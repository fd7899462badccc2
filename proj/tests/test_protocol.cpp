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

#include <string>

#include <gtest/gtest.h>

#include "oracle/crc_oracle.hpp"
#include "oracle/frame_oracle.hpp"
#include "selfassist/json_codec.hpp"
#include "selfassist/protocol.hpp"
#include "support/generators.hpp"

using namespace selfassist;
using namespace selfassist::protocol;
using Bytes = std::vector<std::uint8_t>;

namespace
{

// Independent byte layout, written field by field.
Bytes oracle_frame(const Message & m)
{
  oracle::Bytes b;
  std::uint8_t type = 0;
  if (const auto * x = std::get_if<LevelUpdate>(&m)) {
    type = 0x01; b.u64(x->t_ms).u16(x->accumulator).u8(x->led_level);
  } else if (const auto * x = std::get_if<Squeeze>(&m)) {
    type = 0x02; b.u64(x->t_ms).u16(x->peak).u16(x->duration_ms);
  } else if (const auto * x = std::get_if<TrainingPrompt>(&m)) {
    type = 0x03; b.u64(x->t_ms);
  } else if (const auto * x = std::get_if<SessionEvent>(&m)) {
    type = 0x04;
    b.u64(x->t_ms).u8(static_cast<unsigned>(x->kind)).u8(x->step).u8(static_cast<unsigned>(x->phase));
  } else if (const auto * x = std::get_if<SilentMode>(&m)) {
    type = 0x05; b.u64(x->t_ms).u8(x->on ? 1 : 0);
  } else if (const auto * x = std::get_if<Command>(&m)) {
    type = 0x10; b.u8(static_cast<unsigned>(x->cmd));
  } else if (const auto * x = std::get_if<HistoryRequest>(&m)) {
    type = 0x11; b.u64(x->from_ms).u64(x->to_ms);
  } else if (const auto * x = std::get_if<HistoryResponse>(&m)) {
    type = 0x12; b.u16(x->records.size());
    for (const auto & r : x->records) {
      b.u64(r.t_ms).u8(static_cast<unsigned>(r.kind)).u16(r.value);
    }
  }
  return oracle::frame(type, b.v);
}

Bytes concat(const std::vector<Bytes> & parts)
{
  Bytes out;
  for (const auto & p : parts) {
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<Diagnostic> diags(const Bytes & s) {return decode_all(s).diagnostics;}

HistoryResponse response_of(std::size_t n)
{
  HistoryResponse r;
  for (std::size_t i = 0; i < n; ++i) {
    r.records.push_back({i, RecordKind::level, static_cast<std::uint16_t>(i)});
  }
  return r;
}

}  // namespace

TEST(Crc16, CheckValue)
{
  const std::string s = "123456789";
  const Bytes b(s.begin(), s.end());
  EXPECT_EQ(crc16(b), 0x29B1);
  EXPECT_EQ(crc16({}), 0xFFFF);
}

TEST(Crc16, MatchesBitwiseOracle)
{
  support::Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    Bytes b(support::uniform(rng, 0, 300));
    for (auto & x : b) {
      x = static_cast<std::uint8_t>(rng());
    }
    ASSERT_EQ(crc16(b), oracle::crc16_bitwise(b));
  }
}

TEST(Crc16, IncrementalEqualsOneShot)
{
  const Bytes b = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  Crc16 c;
  c.update(std::span(b).first(3));
  c.update(std::span(b).subspan(3));
  EXPECT_EQ(c.value(), crc16(b));
}

TEST(Encode, StartCommandBytes)
{
  const auto f = encode(Command{CommandCode::start_training});
  const Bytes covered = {0x10, 0x01, 0x00, 0x00};
  const auto crc = oracle::crc16_bitwise(covered);
  EXPECT_EQ(f, (Bytes{0xA5, 0x10, 0x01, 0x00, 0x00,
      static_cast<std::uint8_t>(crc & 0xFF), static_cast<std::uint8_t>(crc >> 8)}));
}

TEST(Encode, ZeroLevelUpdateBytes)
{
  const auto f = encode(LevelUpdate{});
  ASSERT_EQ(f.size(), 17u);
  EXPECT_EQ(Bytes(f.begin(), f.begin() + 4), (Bytes{0xA5, 0x01, 0x0B, 0x00}));
  EXPECT_EQ(Bytes(f.begin() + 4, f.begin() + 15), Bytes(11, 0));
  EXPECT_EQ(f, oracle_frame(LevelUpdate{}));
}

TEST(Encode, MatchesOracleLayout)
{
  support::Rng rng(3);
  for (int i = 0; i < 5000; ++i) {
    const auto m = support::random_message(rng);
    ASSERT_EQ(encode(m), oracle_frame(m)) << json::dump(json::to_json(m));
  }
}

TEST(Encode, HistoryResponseSizeLimit)
{
  EXPECT_EQ(encode(response_of(70)).size(), 6u + 2 + 70 * 11);
  EXPECT_EQ(encode(response_of(92)).size(), 6u + 1014);
  try {
    encode(response_of(93));
    FAIL();
  } catch (const EncodeError & e) {
    EXPECT_EQ(e.code(), EncodeError::Code::oversize);
  }
}

TEST(Encode, OutOfRangeEnumsRejected)
{
  auto code_of = [](const Message & m) {
      try {
        encode(m);
      } catch (const EncodeError & e) {
        return e.code();
      }
      return EncodeError::Code::oversize;
    };
  EXPECT_EQ(code_of(Command{static_cast<CommandCode>(3)}), EncodeError::Code::range);
  EXPECT_EQ(code_of(SessionEvent{0, static_cast<SessionKind>(5), 0, Phase::tense}), EncodeError::Code::range);
  HistoryResponse r;
  r.records.push_back({0, static_cast<RecordKind>(200), 0});
  EXPECT_EQ(code_of(r), EncodeError::Code::range);
}

TEST(ChunkHistory, SplitsAtNinetyTwo)
{
  const auto all = response_of(200).records;
  const auto parts = chunk_history(all);
  ASSERT_EQ(parts.size(), 3u);
  EXPECT_EQ(parts[0].records.size(), 92u);
  EXPECT_EQ(parts[2].records.size(), 16u);
  EXPECT_EQ(chunk_history({}).size(), 1u);
}

TEST(Decode, RoundTripRandomMessages)
{
  support::Rng rng(4);
  for (int i = 0; i < 5000; ++i) {
    const auto m = support::random_message(rng);
    const auto out = decode_all(encode(m));
    ASSERT_TRUE(out.diagnostics.empty());
    ASSERT_EQ(out.messages.size(), 1u);
    ASSERT_EQ(out.messages[0], m);
  }
}

TEST(Decode, ChunkingDoesNotMatter)
{
  support::Rng rng(5);
  std::vector<Message> sent;
  Bytes stream;
  for (int i = 0; i < 50; ++i) {
    sent.push_back(support::random_message(rng));
    const auto f = encode(sent.back());
    stream.insert(stream.end(), f.begin(), f.end());
  }
  for (int trial = 0; trial < 50; ++trial) {
    Decoder d;
    std::vector<Message> got;
    std::size_t pos = 0;
    while (pos < stream.size()) {
      const auto n = std::min<std::size_t>(support::uniform(rng, 1, 700), stream.size() - pos);
      auto out = d.push(std::span(stream).subspan(pos, n));
      EXPECT_TRUE(out.diagnostics.empty());
      got.insert(got.end(), out.messages.begin(), out.messages.end());
      pos += n;
      EXPECT_LE(d.buffered(), kMaxPayload + kOverhead);
    }
    EXPECT_TRUE(d.finish().diagnostics.empty());
    EXPECT_EQ(got, sent);
  }
}

TEST(Decode, LeadingZerosReportedOnceThenFrameDecodes)
{
  auto s = concat({Bytes(5, 0), encode(TrainingPrompt{77})});
  const auto out = decode_all(s);
  ASSERT_EQ(out.diagnostics.size(), 1u);
  EXPECT_EQ(out.diagnostics[0], (Diagnostic{DiagnosticKind::bad_sync, 0}));
  ASSERT_EQ(out.messages.size(), 1u);
  EXPECT_EQ(out.messages[0], Message{TrainingPrompt{77}});
}

TEST(Decode, BitFlipRejectedAndNextFrameSurvives)
{
  auto bad = encode(LevelUpdate{1, 2, 3});
  bad[7] ^= 0x10;
  const auto s = concat({bad, encode(Squeeze{9, 500, 40})});
  const auto out = decode_all(s);
  ASSERT_FALSE(out.diagnostics.empty());
  EXPECT_EQ(out.diagnostics[0], (Diagnostic{DiagnosticKind::crc_mismatch, 0}));
  ASSERT_EQ(out.messages.size(), 1u);
  EXPECT_EQ(out.messages[0], (Message{Squeeze{9, 500, 40}}));
}

TEST(Decode, EverySingleBitFlipIsRejected)
{
  const auto f = encode(SessionEvent{123456, SessionKind::phase_changed, 3, Phase::relax});
  for (std::size_t bit = 0; bit < f.size() * 8; ++bit) {
    auto g = f;
    g[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    const auto out = decode_all(g);
    EXPECT_TRUE(out.messages.empty()) << "bit " << bit;
    EXPECT_FALSE(out.diagnostics.empty()) << "bit " << bit;
  }
}

TEST(Decode, TruncatedStream)
{
  const auto f = encode(TrainingPrompt{5});
  const auto out = decode_all(Bytes(f.begin(), f.end() - 3));
  EXPECT_TRUE(out.messages.empty());
  ASSERT_EQ(out.diagnostics.size(), 1u);
  EXPECT_EQ(out.diagnostics[0].kind, DiagnosticKind::truncated);
}

TEST(Decode, UnknownTypeWithValidCrc)
{
  const auto s = concat({oracle::frame(0x42, {1, 2, 3}), encode(Command{CommandCode::toggle_silent})});
  const auto out = decode_all(s);
  ASSERT_EQ(out.diagnostics.size(), 1u);
  EXPECT_EQ(out.diagnostics[0], (Diagnostic{DiagnosticKind::bad_type, 0}));
  ASSERT_EQ(out.messages.size(), 1u);
}

TEST(Decode, MalformedPayloads)
{
  EXPECT_EQ(diags(oracle::frame(0x01, Bytes(10, 0))).at(0).kind, DiagnosticKind::bad_payload);
  EXPECT_EQ(diags(oracle::frame(0x10, {7})).at(0).kind, DiagnosticKind::bad_payload);
  const Bytes silent_two = {0, 0, 0, 0, 0, 0, 0, 0, 2};
  EXPECT_EQ(diags(oracle::frame(0x05, silent_two)).at(0).kind, DiagnosticKind::bad_payload);
  // count says 2, one record present
  oracle::Bytes b;
  b.u16(2).u64(0).u8(0).u16(0);
  EXPECT_EQ(diags(oracle::frame(0x12, b.v)).at(0).kind, DiagnosticKind::bad_payload);
}

TEST(Decode, OversizeLengthField)
{
  const auto s = concat({Bytes{0xA5, 0x01, 0x01, 0x04}, encode(TrainingPrompt{1})});
  const auto out = decode_all(s);
  ASSERT_FALSE(out.diagnostics.empty());
  EXPECT_EQ(out.diagnostics[0], (Diagnostic{DiagnosticKind::bad_length, 0}));
  ASSERT_EQ(out.messages.size(), 1u);
}

TEST(Decode, ResyncMatchesTwoPassScan)
{
  support::Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    Bytes s;
    for (int i = 0; i < 10; ++i) {
      Bytes junk(support::uniform(rng, 0, 20));
      for (auto & x : junk) {
        x = static_cast<std::uint8_t>(support::coin(rng, 20) ? 0xA5 : rng());
      }
      s.insert(s.end(), junk.begin(), junk.end());
      auto f = encode(support::random_message(rng));
      if (support::coin(rng, 20)) {
        f[support::uniform(rng, 0, f.size() - 1)] ^= static_cast<std::uint8_t>(1u << support::uniform(rng, 0, 7));
      }
      s.insert(s.end(), f.begin(), f.end());
    }
    // Every CRC-valid frame the greedy scan finds decodes, unless it carries
    // an unknown type or malformed payload (possible only inside junk).
    const auto found = oracle::scan_frames(s);
    const auto out = decode_all(s);
    std::size_t bad_frames = 0;
    for (const auto & d : out.diagnostics) {
      if (d.kind == DiagnosticKind::bad_type || d.kind == DiagnosticKind::bad_payload) {
        ++bad_frames;
      }
    }
    EXPECT_EQ(out.messages.size() + bad_frames, found.size()) << "trial " << trial;
  }
}

TEST(Json, CanonicalKeyOrderAndNames)
{
  EXPECT_EQ(json::dump(json::to_json(SessionEvent{5, SessionKind::phase_changed, 2, Phase::relax})),
    R"({"type":"SessionEvent","t_ms":5,"kind":"phase_changed","step":2,"phase":"relax"})");
  EXPECT_EQ(json::dump(json::to_json(SilentMode{1, true})), R"({"type":"SilentMode","t_ms":1,"on":true})");
  EXPECT_EQ(json::dump(json::to_json(Command{CommandCode::start_training})),
    R"({"type":"Command","cmd":"start_training"})");
  HistoryResponse r;
  r.records.push_back({10, RecordKind::squeeze, 700});
  EXPECT_EQ(json::dump(json::to_json(r)),
    R"({"type":"HistoryResponse","count":1,"records":[{"t_ms":10,"kind":"squeeze","value":700}]})");
}

TEST(Json, RoundTripRandomMessages)
{
  support::Rng rng(6);
  for (int i = 0; i < 5000; ++i) {
    const auto m = support::random_message(rng);
    ASSERT_EQ(json::parse_message(json::dump(json::to_json(m))), m);
  }
}

TEST(Json, RejectsMalformedInput)
{
  EXPECT_THROW(json::parse_message("{"), json::JsonError);
  EXPECT_THROW(json::parse_message(R"({"type":"Command","cmd":"explode"})"), json::JsonError);
  EXPECT_THROW(json::parse_message(R"({"type":"LevelUpdate","t_ms":-1,"accumulator":0,"led_level":0})"),
    json::JsonError);
  EXPECT_THROW(json::parse_message(R"({"type":"LevelUpdate","t_ms":0,"accumulator":0,"led_level":256})"),
    json::JsonError);
  EXPECT_THROW(json::parse_message(R"({"type":"HistoryResponse","count":2,"records":[]})"), json::JsonError);
  EXPECT_THROW(json::parse_message(R"([1,2])"), json::JsonError);
}
