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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <thread>

#include "selfassist/protocol.hpp"
#include "selfassist/service.hpp"
#include "selfassist/simulator.hpp"

namespace selfassist
{

struct LiveOptions
{
  /// Stop after this virtual time; run until `stop` otherwise.
  std::optional<std::uint64_t> end_ms;
  /// Virtual ms per wall ms. 0 runs the recorded input as fast as possible
  /// and then continues in real time.
  double speed = 0.0;
  const std::atomic<bool> * stop = nullptr;
};

/// Answers a history query with as many frames as the records need.
inline void answer_history(
  const history::Store & store, net::Service & svc, net::ClientId to, const protocol::HistoryRequest & q)
{
  const auto records = q.from_ms <= q.to_ms ? store.query_range(q.from_ms, q.to_ms)
                                            : std::vector<HistoryRecord>{};
  for (const auto & part : protocol::chunk_history(records)) {
    svc.send(to, part);
  }
}

/**
 * Device event loop with live clients.
 *
 * The simulator must already be booted and its output callback should
 * broadcast protocol messages through `svc`. Inbound commands enter the
 * device at the next tick; history requests are answered from the store.
 */
inline void run_live(sim::Simulator & sim, net::Service & svc, const LiveOptions & opt)
{
  using clock = std::chrono::steady_clock;
  const auto input_end = sim.input_end_ms();
  auto wall_anchor = clock::now();
  auto virt_anchor = sim.now_ms();
  bool realtime = opt.speed > 0.0;
  const double pace = opt.speed > 0.0 ? opt.speed : 1.0;

  while (true) {
    if (opt.stop && opt.stop->load()) {
      break;
    }
    if (opt.end_ms && sim.now_ms() > *opt.end_ms) {
      break;
    }
    if (!realtime && sim.now_ms() > input_end) {
      realtime = true;
      wall_anchor = clock::now();
      virt_anchor = sim.now_ms();
    }
    if (realtime) {
      std::this_thread::sleep_until(wall_anchor + std::chrono::duration<double, std::milli>(
          static_cast<double>(sim.now_ms() - virt_anchor) / pace));
    }
    for (auto & in : svc.drain()) {
      if (const auto * cmd = std::get_if<protocol::Command>(&in.message)) {
        sim.inject(cmd->cmd);
      } else if (const auto * q = std::get_if<protocol::HistoryRequest>(&in.message)) {
        answer_history(sim.store(), svc, in.client, *q);
      }
    }
    sim.tick();
  }
}

}  // namespace selfassist
