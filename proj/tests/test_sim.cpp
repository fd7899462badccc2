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

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "selfassist/config.hpp"
#include "selfassist/json_codec.hpp"
#include "selfassist/simulator.hpp"
#include "selfassist/trace.hpp"

using namespace selfassist;
namespace fs = std::filesystem;

namespace
{

std::vector<json::Json> lines_of(const std::string & log)
{
  std::vector<json::Json> v;
  std::istringstream in(log);
  std::string line;
  while (std::getline(in, line)) {
    v.push_back(json::Json::parse(line));
  }
  return v;
}

std::size_t count_type(const std::vector<json::Json> & lines, const std::string & type)
{
  return static_cast<std::size_t>(std::count_if(lines.begin(), lines.end(),
    [&](const json::Json & j) {return j["type"] == type;}));
}

std::size_t config_error_line(const std::string & text)
{
  try {
    parse_config(text);
  } catch (const ConfigError & e) {
    return e.line();
  }
  ADD_FAILURE() << "accepted: " << text;
  return 0;
}

std::size_t trace_error_line(const std::string & text)
{
  try {
    sim::parse_trace(text);
  } catch (const sim::TraceError & e) {
    return e.line();
  }
  ADD_FAILURE() << "accepted: " << text;
  return 0;
}

class Scratch : public ::testing::Test
{
protected:
  void SetUp() override
  {
    const auto * info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("selfassist_sim_" + std::to_string(::getpid()) + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override {fs::remove_all(dir_);}

  fs::path file(const std::string & name, const std::string & text) const
  {
    std::ofstream(dir_ / name, std::ios::binary) << text;
    return dir_ / name;
  }

  std::string read(const fs::path & p) const
  {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  int cli(const std::string & args) const
  {
    const auto cmd = std::string(SELFASSIST_CLI) + " " + args + " 2>/dev/null";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }

  fs::path dir_;
};

}  // namespace

TEST(Config, DefaultFileMatchesBuiltInDefaults)
{
  const auto cfg = load_config(SELFASSIST_DATA_DIR "/default.conf");
  const DeviceConfig d;
  EXPECT_EQ(cfg.device.p_hi, d.p_hi);
  EXPECT_EQ(cfg.device.a_max, d.a_max);
  EXPECT_EQ(cfg.device.tick_ms, d.tick_ms);
  EXPECT_EQ(*cfg.device.plan, *d.plan);
}

TEST(Config, EmptyTextGivesDefaults)
{
  const auto cfg = parse_config("# nothing\n\n");
  EXPECT_EQ(cfg.device.p_lo, 150u);
  EXPECT_FALSE(cfg.history_path);
  EXPECT_EQ(cfg.epoch_ms, 0u);
}

TEST(Config, ErrorsCarryLineNumbers)
{
  EXPECT_EQ(config_error_line("p_hi = 300\nbogus = 1\n"), 2u);
  EXPECT_EQ(config_error_line("p_hi = lots\n"), 1u);
  EXPECT_EQ(config_error_line("\n\nno equals sign\n"), 3u);
  EXPECT_EQ(config_error_line("cancel_reset_fraction = 0.5x\n"), 1u);
  EXPECT_EQ(config_error_line("history_flush = sometimes\n"), 1u);
}

TEST(Config, CrossFieldValidation)
{
  EXPECT_THROW(parse_config("p_lo = 300\n"), ConfigError);
  EXPECT_THROW(parse_config("delta_min = 200\n"), ConfigError);
  EXPECT_THROW(parse_config("tick_ms = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("led_count = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("cancel_reset_fraction = 1.5\n"), ConfigError);
}

TEST_F(Scratch, RelativePlanPathResolvesAgainstConfigDir)
{
  file("short.txt", "name: short\nhands | Squeeze | 100 | 200\n");
  const auto cfg = load_config(file("c.conf", "plan_path = short.txt\n"));
  EXPECT_EQ(cfg.device.plan->name, "short");
  EXPECT_EQ(cfg.device.plan->total_ms(), 300u);
}

TEST(Trace, ParseAndErrors)
{
  const auto t = sim::parse_trace("t_ms,pressure\n0,0\n50,1023\n50,10\n");
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[1].pressure, 1023);

  EXPECT_EQ(trace_error_line("time,p\n0,0\n"), 1u);
  EXPECT_EQ(trace_error_line("t_ms,pressure\n0,0\n10,1024\n"), 3u);
  EXPECT_EQ(trace_error_line("t_ms,pressure\n10,0\n5,0\n"), 3u);
  EXPECT_EQ(trace_error_line("t_ms,pressure\n0,0,0\n"), 2u);
  EXPECT_EQ(trace_error_line("t_ms,pressure\nx,0\n"), 2u);
}

TEST(Trace, FormatRoundTrip)
{
  const auto t = sim::gen_trace(3, sim::Profile::stressed, 20000, {});
  EXPECT_EQ(sim::parse_trace(sim::format_trace(t)), t);
}

TEST(Script, ParseAndErrors)
{
  const auto s = sim::parse_script("t_ms,event\n100,start\n200,app_silent\n");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_TRUE(std::holds_alternative<device::ButtonPress>(s[0].event));
  EXPECT_TRUE(std::holds_alternative<device::AppCommand>(s[1].event));
  EXPECT_THROW(sim::parse_script("t_ms,event\n1,jump\n"), sim::TraceError);
  EXPECT_THROW(sim::parse_script("t_ms,event\n5,start\n1,start\n"), sim::TraceError);
}

TEST(GenTrace, DeterministicAndInRange)
{
  const DeviceConfig cfg;
  for (auto profile : {sim::Profile::calm, sim::Profile::stressed}) {
    const auto a = sim::gen_trace(42, profile, 60000, cfg);
    EXPECT_EQ(a, sim::gen_trace(42, profile, 60000, cfg));
    EXPECT_NE(a, sim::gen_trace(43, profile, 60000, cfg));
    ASSERT_EQ(a.size(), 60000u / sim::kSamplePeriodMs);
    for (const auto & s : a) {
      EXPECT_LE(s.pressure, 1023);
      EXPECT_LT(s.t_ms, 60000u);
    }
  }
}

TEST(GenTrace, CalmNeverSqueezesStressedDoes)
{
  SimConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto calm = lines_of(sim::run_to_log(cfg, sim::gen_trace(seed, sim::Profile::calm, 120000, {}), {}));
    EXPECT_EQ(count_type(calm, "Squeeze"), 0u) << "seed " << seed;
    const auto stressed =
      lines_of(sim::run_to_log(cfg, sim::gen_trace(seed, sim::Profile::stressed, 120000, {}), {}));
    EXPECT_GT(count_type(stressed, "Squeeze"), 10u) << "seed " << seed;
  }
}

TEST(Simulator, EmptyTraceOnlyBoots)
{
  const auto lines = lines_of(sim::run_to_log(SimConfig{}, {}, {}));
  ASSERT_EQ(lines.size(), 1u);
  EXPECT_EQ(lines[0].dump(), R"({"type":"LevelUpdate","t_ms":0,"accumulator":0,"led_level":0})");
}

TEST(Simulator, RunsAreReproducible)
{
  SimConfig cfg;
  const auto trace = sim::gen_trace(42, sim::Profile::stressed, 300000, cfg.device);
  const auto script = sim::parse_script("t_ms,event\n60000,silent\n100000,start\n");
  EXPECT_EQ(sim::run_to_log(cfg, trace, script), sim::run_to_log(cfg, trace, script));
}

TEST(Simulator, WallClockPacingDoesNotChangeOutput)
{
  SimConfig cfg;
  const auto trace = sim::gen_trace(7, sim::Profile::stressed, 3000, cfg.device);
  std::ostringstream fast;
  std::ostringstream paced;
  {
    sim::Simulator s(cfg, trace, {}, {}, sim::log_writer(fast));
    s.boot();
    s.run_until(s.input_end_ms(), 0.0);
  }
  {
    sim::Simulator s(cfg, trace, {}, {}, sim::log_writer(paced));
    s.boot();
    s.run_until(s.input_end_ms(), 20.0);
  }
  EXPECT_EQ(fast.str(), paced.str());
}

TEST(Simulator, HistoryRecordsMirrorLogAndCarryEpoch)
{
  SimConfig cfg;
  cfg.epoch_ms = 1792108800000ULL;
  const auto trace = sim::gen_trace(42, sim::Profile::stressed, 120000, cfg.device);
  std::ostringstream log;
  sim::Simulator s(cfg, trace, {}, {}, sim::log_writer(log));
  s.boot();
  s.run_until(s.input_end_ms());

  std::vector<HistoryRecord> from_log;
  for (const auto & j : lines_of(log.str())) {
    if (j["type"] == "HistoryRecord") {
      from_log.push_back({j["t_ms"].get<std::uint64_t>(),
        *record_kind_from_string(j["kind"].get<std::string>()), j["value"].get<std::uint16_t>()});
    }
  }
  EXPECT_EQ(from_log, s.store().records());
  ASSERT_FALSE(from_log.empty());
  for (const auto & r : from_log) {
    EXPECT_GE(r.t_ms, cfg.epoch_ms);
  }
}

TEST(Simulator, InjectedCommandTakesEffectOnNextTick)
{
  SimConfig cfg;
  std::vector<device::Output> outs;
  sim::Simulator s(cfg, {}, {}, {}, [&](const device::Output & o) {outs.push_back(o);});
  s.boot();
  s.run_until(500);
  s.inject(protocol::CommandCode::toggle_silent);
  const auto t = s.now_ms();
  outs.clear();
  s.tick();
  ASSERT_FALSE(outs.empty());
  bool saw = false;
  for (const auto & o : outs) {
    if (const auto * m = std::get_if<protocol::Message>(&o.body)) {
      if (const auto * sm = std::get_if<protocol::SilentMode>(m)) {
        saw = true;
        EXPECT_TRUE(sm->on);
        EXPECT_EQ(sm->t_ms, t);
      }
    }
  }
  EXPECT_TRUE(saw);
}

TEST(Simulator, SessionBoundariesExactForAnyTick)
{
  for (std::uint64_t tick : {1u, 10u, 50u, 7u}) {
    SimConfig cfg;
    cfg.device.tick_ms = tick;
    cfg.device.a_max = 100;
    cfg.device.delta_min = 100;
    // One squeeze fills the gauge; start lands on a tick boundary.
    const auto trace = sim::parse_trace("t_ms,pressure\n0,0\n100,900\n200,0\n");
    const auto script = sim::parse_script("t_ms,event\n1400,start\n");
    const auto lines = lines_of(sim::run_to_log(cfg, trace, script, 200000));
    std::vector<std::uint64_t> times;
    std::uint64_t started = 0;
    for (const auto & j : lines) {
      if (j["type"] == "SessionEvent") {
        if (j["kind"] == "started") {
          started = j["t_ms"];
        } else {
          times.push_back(j["t_ms"].get<std::uint64_t>() - started);
        }
      }
    }
    ASSERT_EQ(times.size(), 14u) << "tick " << tick;
    EXPECT_EQ(times.front(), 5000u);
    EXPECT_EQ(times.back(), 105000u);
  }
}

TEST_F(Scratch, CliExitCodes)
{
  const auto trace = file("t.csv", "t_ms,pressure\n0,0\n");
  const auto good = file("good.conf", "");
  const auto bad = file("bad.conf", "p_hi = nope\n");
  const auto out = (dir_ / "out.jsonl").string();
  EXPECT_EQ(cli("run --trace " + trace.string() + " --config " + good.string() + " --out " + out), 0);
  EXPECT_EQ(cli("run --trace " + trace.string() + " --config " + bad.string() + " --out " + out), 2);
  EXPECT_EQ(cli("run --trace " + (dir_ / "missing.csv").string() + " --config " + good.string() +
    " --out " + out), 2);
  EXPECT_EQ(cli("run --trace " + trace.string() + " --config " + good.string() + " --out " +
    (dir_ / "no" / "such" / "dir.jsonl").string()), 1);
  EXPECT_EQ(cli("frobnicate"), 2);
}

TEST_F(Scratch, CliGenMatchesLibrary)
{
  const auto out = dir_ / "g.csv";
  ASSERT_EQ(cli("gen --seed 9 --profile stressed --duration-ms 30000 --out " + out.string()), 0);
  EXPECT_EQ(read(out), sim::format_trace(sim::gen_trace(9, sim::Profile::stressed, 30000, {})));
}

TEST_F(Scratch, CliCrc)
{
  const auto out = dir_ / "crc.txt";
  ASSERT_EQ(std::system((std::string(SELFASSIST_CLI) + " crc --hex 313233343536373839 > " +
    out.string()).c_str()), 0);
  EXPECT_EQ(read(out), "0x29B1\n");
}
