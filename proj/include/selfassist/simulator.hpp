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

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "selfassist/config.hpp"
#include "selfassist/device.hpp"
#include "selfassist/history.hpp"
#include "selfassist/json_codec.hpp"
#include "selfassist/trace.hpp"

namespace selfassist::sim
{

/**
 * Runs the device on a virtual clock.
 *
 * Each tick at time t feeds, in order: the latest trace sample at or before
 * t (zero-order hold), script entries due by t, queued external commands,
 * and finally a Tick. Every device output goes to the output callback;
 * history records are shifted by epoch_ms and appended to the store first.
 */
class Simulator
{
public:
  using OutputFn = std::function<void (const device::Output &)>;

  Simulator(SimConfig cfg, Trace trace, Script script, history::Store store, OutputFn on_output)
  : cfg_(std::move(cfg)), trace_(std::move(trace)), script_(std::move(script)),
    store_(std::move(store)), on_output_(std::move(on_output)), state_(device::initial_state())
  {}

  void boot()
  {
    emit(device::boot(state_, cfg_.device, 0));
  }

  /// Queues an app command for the next tick.
  void inject(protocol::CommandCode cmd) {pending_.push_back(cmd);}

  /// Processes the tick at now_ms() and moves the clock forward.
  void tick()
  {
    const auto t = now_;
    while (trace_pos_ < trace_.size() && trace_[trace_pos_].t_ms <= t) {
      held_ = trace_[trace_pos_++];
      have_sample_ = true;
    }
    if (have_sample_) {
      apply(device::PressureSample{t, held_.pressure});
    }
    while (script_pos_ < script_.size() && script_[script_pos_].t_ms <= t) {
      apply(retime(script_[script_pos_++].event, t));
    }
    while (!pending_.empty()) {
      apply(device::AppCommand{t, pending_.front()});
      pending_.pop_front();
    }
    apply(device::Tick{t});
    now_ += cfg_.device.tick_ms;
  }

  /// Ticks through every tick time <= end_ms. With speed > 0 each tick waits
  /// for its wall-clock slot (virtual ms / speed).
  void run_until(std::uint64_t end_ms, double speed = 0.0)
  {
    const auto wall_start = std::chrono::steady_clock::now();
    const auto virt_start = now_;
    while (now_ <= end_ms) {
      if (speed > 0.0) {
        std::this_thread::sleep_until(wall_start + std::chrono::duration<double, std::milli>(
            static_cast<double>(now_ - virt_start) / speed));
      }
      tick();
    }
  }

  /// Last timestamp named by the trace or script.
  std::uint64_t input_end_ms() const
  {
    std::uint64_t end = 0;
    if (!trace_.empty()) {
      end = trace_.back().t_ms;
    }
    if (!script_.empty()) {
      end = std::max(end, script_.back().t_ms);
    }
    return end;
  }

  std::uint64_t now_ms() const {return now_;}
  const device::DeviceState & state() const {return state_;}
  const SimConfig & config() const {return cfg_;}
  history::Store & store() {return store_;}
  const history::Store & store() const {return store_;}

private:
  static device::Event retime(device::Event e, std::uint64_t t)
  {
    std::visit([t](auto & v) {v.t_ms = t;}, e);
    return e;
  }

  void apply(const device::Event & e)
  {
    auto r = device::step(state_, e, cfg_.device);
    state_ = std::move(r.state);
    emit(std::move(r.outputs));
  }

  void emit(std::vector<device::Output> outputs)
  {
    for (auto & o : outputs) {
      if (auto * rec = std::get_if<HistoryRecord>(&o.body)) {
        rec->t_ms += cfg_.epoch_ms;
        o.t_ms = rec->t_ms;
        store_.append(*rec);
      }
      if (on_output_) {
        on_output_(o);
      }
    }
  }

  SimConfig cfg_;
  Trace trace_;
  Script script_;
  history::Store store_;
  OutputFn on_output_;

  device::DeviceState state_;
  std::uint64_t now_ = 0;
  std::size_t trace_pos_ = 0;
  std::size_t script_pos_ = 0;
  device::PressureSample held_;
  bool have_sample_ = false;
  std::deque<protocol::CommandCode> pending_;
};

/// Writes one canonical-JSON line per output.
inline Simulator::OutputFn log_writer(std::ostream & out)
{
  return [&out](const device::Output & o) {
           out << json::dump(json::to_json(o)) << '\n';
         };
}

/// Boots and runs to `end_ms` (default: end of trace/script), returning the
/// event log. History goes to `store`.
inline std::string run_to_log(const SimConfig & cfg, const Trace & trace, const Script & script,
  std::optional<std::uint64_t> end_ms = std::nullopt, history::Store store = {})
{
  std::ostringstream log;
  Simulator sim(cfg, trace, script, std::move(store), log_writer(log));
  sim.boot();
  sim.run_until(end_ms.value_or(sim.input_end_ms()));
  return log.str();
}

}  // namespace selfassist::sim
