/*
 * Copyright (c) 2026, the edgebus authors
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
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "edgebus/client.hpp"

namespace edgebus::bench {

/**
 * Load harness: fixed-rate publishers against one broker, counting
 * subscribers against another (possibly the same), message throughput
 * MT = received / duration. Topics are arranged so every message is
 * intended for exactly one subscriber.
 */
struct BenchPlan {
  double mpr = 1000;          // messages/second across all publishers
  int duration_s = 30;        // publishing window
  size_t payload_bytes = 175; // typical sensor-reading payload
  int publishers = 1;
  int subscribers = 1;
  int grace_ms = 3000;        // drain window after publishing stops
  std::uint64_t seed = 1;
  bool per_second = false;    // collect per-second counters
};

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};

struct BenchResult {
  std::uint64_t published = 0;
  std::uint64_t received = 0;
  double mt = 0;  // messages per second
  bool valid = false;
  std::string error;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> per_second;
};

namespace detail {

inline std::string bench_topic(int publisher_index) {
  return "bench.p" + std::to_string(publisher_index);
}

}  // namespace detail

/// Publishes at the planned rate for the planned duration and reports
/// throughput. Topic i goes to subscriber i mod subscribers.
inline BenchResult run_bench(const BenchPlan& plan, const Endpoint& pub_broker,
                             const Endpoint& sub_broker) {
  if (plan.mpr <= 0) throw Error("bench: mpr must be positive");
  if (plan.payload_bytes < 1) throw Error("bench: payload must be >= 1 byte");
  if (plan.publishers < 1 || plan.subscribers < 1)
    throw Error("bench: need at least one publisher and one subscriber");
  if (plan.duration_s < 1) throw Error("bench: duration must be >= 1s");

  BenchResult result;
  using clock = std::chrono::steady_clock;

  std::vector<std::unique_ptr<client::Client>> subs;
  try {
    for (int s = 0; s < plan.subscribers; ++s) {
      auto c = std::make_unique<client::Client>();
      c->connect(sub_broker.host, sub_broker.port,
                 "bench-sub" + std::to_string(s));
      for (int p = s; p < plan.publishers; p += plan.subscribers) {
        if (!c->subscribe(detail::bench_topic(p)))
          throw Error("bench: subscription refused");
      }
      subs.push_back(std::move(c));
    }
  } catch (const Error& e) {
    result.error = e.what();
    return result;
  }

  std::atomic<std::uint64_t> published{0};
  std::atomic<bool> failed{false};
  std::string failure;
  std::mutex failure_mu;

  auto receive_total = [&subs] {
    std::uint64_t total = 0;
    for (const auto& c : subs) total += c->received_count();
    return total;
  };

  // Token bucket per publisher, 10ms granularity.
  const double rate_each = plan.mpr / plan.publishers;
  std::vector<std::thread> pub_threads;
  auto start = clock::now();
  auto deadline = start + std::chrono::seconds(plan.duration_s);

  for (int p = 0; p < plan.publishers; ++p) {
    pub_threads.emplace_back([&, p] {
      try {
        client::Client c;
        c.connect(pub_broker.host, pub_broker.port,
                  "bench-pub" + std::to_string(p));
        std::mt19937_64 rng(plan.seed + p);
        std::string payload(plan.payload_bytes, '\0');
        for (auto& ch : payload) ch = static_cast<char>(rng() & 0xff);
        const std::string topic = detail::bench_topic(p);

        double tokens = 0;
        auto tick = clock::now();
        while (clock::now() < deadline && !failed) {
          std::this_thread::sleep_for(std::chrono::milliseconds(10));
          auto now = clock::now();
          tokens += rate_each *
                    std::chrono::duration<double>(now - tick).count();
          tick = now;
          int burst = static_cast<int>(tokens);
          tokens -= burst;
          for (int i = 0; i < burst && now < deadline; ++i) {
            c.publish(topic, payload);
            ++published;
          }
        }
        c.disconnect();
      } catch (const Error& e) {
        failed = true;
        std::lock_guard<std::mutex> lock(failure_mu);
        failure = e.what();
      }
    });
  }

  std::vector<std::pair<std::uint64_t, std::uint64_t>> per_second;
  if (plan.per_second) {
    for (int s = 0; s < plan.duration_s; ++s) {
      std::this_thread::sleep_until(start + std::chrono::seconds(s + 1));
      per_second.emplace_back(published.load(), receive_total());
    }
  }

  for (auto& t : pub_threads) t.join();

  // Drain: wait out the grace period or until the counters settle.
  auto grace_end =
      clock::now() + std::chrono::milliseconds(plan.grace_ms);
  std::uint64_t last = receive_total();
  auto last_change = clock::now();
  while (clock::now() < grace_end) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    std::uint64_t cur = receive_total();
    if (cur != last) {
      last = cur;
      last_change = clock::now();
    } else if (clock::now() - last_change > std::chrono::milliseconds(500) &&
               cur >= published) {
      break;
    }
  }

  result.published = published;
  result.received = receive_total();
  result.mt = static_cast<double>(result.received) / plan.duration_s;
  result.per_second = std::move(per_second);
  if (failed) {
    result.valid = false;
    result.error = failure.empty() ? "publisher failed" : failure;
  } else {
    result.valid = true;
  }
  for (auto& c : subs) c->disconnect();
  return result;
}

}  // namespace edgebus::bench
