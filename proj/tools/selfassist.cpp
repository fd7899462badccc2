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

#include <atomic>
#include <cctype>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "selfassist/config.hpp"
#include "selfassist/history.hpp"
#include "selfassist/host.hpp"
#include "selfassist/protocol.hpp"
#include "selfassist/service.hpp"
#include "selfassist/simulator.hpp"
#include "selfassist/trace.hpp"

namespace
{

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitInput = 2;
constexpr int kExitBind = 3;

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) {g_stop = true;}

struct RunArgs
{
  std::string trace;
  std::string config;
  std::string out;
  double speed = 0.0;
  std::string listen;
  std::string ws;
  std::string script;
  std::optional<std::uint64_t> duration_ms;
  std::string history;
};

struct GenArgs
{
  std::uint64_t seed = 0;
  std::string profile;
  std::uint64_t duration_ms = 0;
  std::string out;
  std::string config;
};

int cmd_run(const RunArgs & a)
{
  using namespace selfassist;
  SimConfig cfg;
  sim::Trace trace;
  sim::Script script;
  try {
    cfg = load_config(a.config);
    trace = sim::load_trace(a.trace);
    if (!a.script.empty()) {
      script = sim::load_script(a.script);
    }
  } catch (const sim::TraceError & e) {
    std::cerr << "error: trace: " << e.what() << "\n";
    return kExitInput;
  } catch (const ConfigError & e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return kExitInput;
  }
  if (!a.history.empty()) {
    cfg.history_path = a.history;
  }

  history::Store store;
  if (cfg.history_path) {
    store = history::Store::load(*cfg.history_path, cfg.history_flush);
    if (store.warning()) {
      std::cerr << "warning: " << *store.warning() << "\n";
    }
  }

  std::ofstream log(a.out, std::ios::binary | std::ios::trunc);
  if (!log) {
    std::cerr << "error: cannot write " << a.out << "\n";
    return kExitIo;
  }

  const bool serving = !a.listen.empty() || !a.ws.empty();
  std::optional<net::Service> svc;
  if (serving) {
    try {
      std::optional<net::Endpoint> tcp_ep;
      std::optional<net::Endpoint> ws_ep;
      if (!a.listen.empty()) {tcp_ep = net::parse_endpoint(a.listen);}
      if (!a.ws.empty()) {ws_ep = net::parse_endpoint(a.ws);}
      svc.emplace(tcp_ep, ws_ep);
    } catch (const std::invalid_argument & e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitInput;
    } catch (const net::BindError & e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitBind;
    }
    std::cerr << "serving";
    if (svc->tcp_port()) {std::cerr << " tcp:" << svc->tcp_port();}
    if (svc->ws_port()) {std::cerr << " ws:" << svc->ws_port();}
    std::cerr << std::endl;
  }

  auto write_log = sim::log_writer(log);
  auto on_output = [&](const device::Output & o) {
      write_log(o);
      if (svc) {
        if (const auto * m = std::get_if<protocol::Message>(&o.body)) {
          svc->broadcast(*m);
        }
      }
    };

  try {
    sim::Simulator simulator(cfg, std::move(trace), std::move(script), std::move(store), on_output);
    simulator.boot();
    if (serving) {
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      svc->start();
      run_live(simulator, *svc, LiveOptions{a.duration_ms, a.speed, &g_stop});
      svc->stop();
    } else {
      simulator.run_until(a.duration_ms.value_or(simulator.input_end_ms()), a.speed);
    }
    simulator.store().flush();
  } catch (const history::HistoryError & e) {
    std::cerr << "error: history: " << e.what() << "\n";
    return kExitIo;
  }
  log.flush();
  return log ? kExitOk : kExitIo;
}

int cmd_gen(const GenArgs & a)
{
  using namespace selfassist;
  DeviceConfig dev;
  if (!a.config.empty()) {
    try {
      dev = load_config(a.config).device;
    } catch (const ConfigError & e) {
      std::cerr << "error: config: " << e.what() << "\n";
      return kExitInput;
    }
  }
  const auto profile = a.profile == "calm" ? sim::Profile::calm : sim::Profile::stressed;
  const auto trace = sim::gen_trace(a.seed, profile, a.duration_ms, dev);
  std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
  out << sim::format_trace(trace);
  return out ? kExitOk : kExitIo;
}

int cmd_crc(const std::string & hex)
{
  std::vector<std::uint8_t> bytes;
  std::string digits;
  for (char c : hex) {
    if (std::isxdigit(static_cast<unsigned char>(c))) {
      digits.push_back(c);
    } else if (c != ' ' && c != ':' && c != '-') {
      std::cerr << "error: not a hex string\n";
      return kExitInput;
    }
  }
  if (digits.size() % 2 != 0) {
    std::cerr << "error: odd number of hex digits\n";
    return kExitInput;
  }
  for (std::size_t i = 0; i < digits.size(); i += 2) {
    bytes.push_back(static_cast<std::uint8_t>(std::stoul(digits.substr(i, 2), nullptr, 16)));
  }
  std::printf("0x%04X\n", selfassist::protocol::crc16(bytes));
  return kExitOk;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Self-Assistant device simulator"};
  app.require_subcommand(1);

  RunArgs run;
  auto * run_cmd = app.add_subcommand("run", "Replay a pressure trace through the device");
  run_cmd->add_option("--trace", run.trace, "Trace CSV (t_ms,pressure)")->required();
  run_cmd->add_option("--config", run.config, "Device config (key = value)")->required();
  run_cmd->add_option("--out", run.out, "Event log output (JSON lines)")->required();
  run_cmd->add_option("--speed", run.speed, "Real-time multiplier, 0 = as fast as possible")
    ->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--listen", run.listen, "TCP endpoint for raw frames, HOST:PORT");
  run_cmd->add_option("--ws", run.ws, "WebSocket endpoint for JSON, HOST:PORT");
  run_cmd->add_option("--script", run.script, "Button/command script CSV (t_ms,event)");
  run_cmd->add_option("--duration-ms", run.duration_ms, "Virtual run length");
  run_cmd->add_option("--history", run.history, "History file (overrides history_path)");

  GenArgs gen;
  auto * gen_cmd = app.add_subcommand("gen", "Generate a synthetic pressure trace");
  gen_cmd->add_option("--seed", gen.seed, "RNG seed")->required();
  gen_cmd->add_option("--profile", gen.profile, "calm or stressed")
    ->required()->check(CLI::IsMember({"calm", "stressed"}));
  gen_cmd->add_option("--duration-ms", gen.duration_ms, "Trace length")->required();
  gen_cmd->add_option("--out", gen.out, "Output CSV")->required();
  gen_cmd->add_option("--config", gen.config, "Config supplying p_hi/p_lo");

  std::string hex;
  auto * crc_cmd = app.add_subcommand("crc", "Print the CRC-16/CCITT-FALSE of hex bytes");
  crc_cmd->add_option("--hex", hex, "Bytes as hex, e.g. 31323334")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp & e) {
    return app.exit(e);
  } catch (const CLI::ParseError & e) {
    app.exit(e);
    return kExitInput;
  }

  if (*run_cmd) {
    return cmd_run(run);
  }
  if (*gen_cmd) {
    return cmd_gen(gen);
  }
  return cmd_crc(hex);
}
