// Copyright 2026 The HumorChain Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HUMORCHAIN_UTIL_H_
#define HUMORCHAIN_UTIL_H_

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

namespace humorchain {

// Lowercase hex SHA-256 of `data`.
std::string Sha256Hex(std::string_view data);

// Stable 64-bit hash (first 8 bytes of SHA-256). Used wherever a seed must be
// derived from a string identically on every platform.
uint64_t StableHash64(std::string_view data);

std::string ReadFile(const std::string& path);

class Clock {
 public:
  virtual ~Clock() = default;
  virtual int64_t NowMicros() = 0;
};

class WallClock : public Clock {
 public:
  int64_t NowMicros() override;
};

// Counts up by one on every read. Gives byte-reproducible traces.
class LogicalClock : public Clock {
 public:
  int64_t NowMicros() override { return ++ticks_; }

 private:
  std::atomic<int64_t> ticks_{0};
};

// "wall" or "logical".
std::unique_ptr<Clock> MakeClock(std::string_view kind);

}  // namespace humorchain

#endif  // HUMORCHAIN_UTIL_H_
