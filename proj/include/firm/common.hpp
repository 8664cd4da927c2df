// Copyright 2026 The firm-planar Authors
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

#ifndef FIRM_COMMON_HPP_
#define FIRM_COMMON_HPP_

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace firm {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/layer shape mismatches. Message names the offending layer or field.
struct DimensionError : Error {
  using Error::Error;
};

// Invalid configuration value (bad range, missing key, unknown key).
struct ConfigError : Error {
  using Error::Error;
};

// Model/trajectory/dataset file parse failures, with line/field context.
struct ParseError : Error {
  using Error::Error;
};

// Simulation produced a non-finite state; carries the last valid time.
struct DivergedError : Error {
  DivergedError(const std::string& msg, double last_valid_time)
      : Error(msg), last_valid_time(last_valid_time) {}
  double last_valid_time = 0.0;
};

// A pipeline stage was invoked before its upstream artifact exists.
struct PrereqError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Hashing and seed derivation
// ---------------------------------------------------------------------------

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a64_bytes(const void* data, size_t n,
                              uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// ---------------------------------------------------------------------------
// Deterministic RNG
//
// All randomness flows from one global seed through named substreams.
// Distributions are hand-rolled so draws are identical across platforms.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  // Derives an independent stream from (seed, name, index).
  static Rng derive(uint64_t seed, std::string_view name, uint64_t index = 0) {
    return Rng(splitmix64(seed ^ fnv1a64(name)) ^ splitmix64(index + 1));
  }

  Rng substream(std::string_view name, uint64_t index = 0) const {
    return derive(seed_, name, index);
  }

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() { return engine_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (cosine branch only, no cached spare).
  double normal() {
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double std) { return mean + std * normal(); }

  // Uniform integer in [lo, hi], rejection sampled.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
    uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    uint64_t v = 0;
    do {
      v = engine_();
    } while (v >= limit);
    return lo + static_cast<int64_t>(v % range);
  }

 private:
  uint64_t seed_ = 0;
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Little-endian binary IO helpers
// ---------------------------------------------------------------------------

struct BinaryWriter {
  std::string buf;

  void u8(uint8_t v) { buf.push_back(static_cast<char>(v)); }
  void u16(uint16_t v) { put(&v, 2); }
  void u32(uint32_t v) { put(&v, 4); }
  void u64(uint64_t v) { put(&v, 8); }
  void f64(double v) { put(&v, 8); }
  void f64s(const std::vector<double>& v) {
    put(v.data(), v.size() * sizeof(double));
  }
  void str(std::string_view s) {
    u32(static_cast<uint32_t>(s.size()));
    buf.append(s.data(), s.size());
  }
  void raw(std::string_view s) { buf.append(s.data(), s.size()); }

  void put(const void* p, size_t n) {
    buf.append(static_cast<const char*>(p), n);
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for write: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed: " + path);
  }
};

struct BinaryReader {
  std::string buf;
  size_t pos = 0;

  explicit BinaryReader(std::string data) : buf(std::move(data)) {}

  static BinaryReader load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::string data((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return BinaryReader(std::move(data));
  }

  void need(size_t n) const {
    if (pos + n > buf.size()) throw IoError("unexpected end of file");
  }
  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(buf[pos++]);
  }
  uint16_t u16() { uint16_t v; get(&v, 2); return v; }
  uint32_t u32() { uint32_t v; get(&v, 4); return v; }
  uint64_t u64() { uint64_t v; get(&v, 8); return v; }
  double f64() { double v; get(&v, 8); return v; }
  void f64s(std::vector<double>& v, size_t n) {
    v.resize(n);
    get(v.data(), n * sizeof(double));
  }
  std::string str() {
    uint32_t n = u32();
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  bool done() const { return pos == buf.size(); }

  void get(void* p, size_t n) {
    need(n);
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
};

// ---------------------------------------------------------------------------
// Small numeric helpers
// ---------------------------------------------------------------------------

// Wraps an angle difference into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0) a += 2.0 * M_PI;
  return a - M_PI;
}

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline double clampd(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

}  // namespace firm

#endif  // FIRM_COMMON_HPP_
