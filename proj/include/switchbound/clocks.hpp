#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <vector>

#include "switchbound/common.hpp"
#include "switchbound/layout.hpp"

namespace switchbound {

/// splitmix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
inline constexpr const char* kStreamAlgorithm = "mix64-ctr/1";

/// Reserved block ids. Block 0 carries the global clock, state s uses s + 1.
inline constexpr std::uint64_t kGlobalClockBlock = 0;
inline constexpr std::uint64_t kNoiseBlock = std::numeric_limits<std::uint64_t>::max();
inline constexpr std::uint64_t block_id_of_state(State s) { return static_cast<std::uint64_t>(s) + 1; }

struct StreamId {
  std::uint64_t scenario = 0;
  std::uint64_t replica = 0;
  std::uint64_t block = kGlobalClockBlock;

  bool operator==(const StreamId&) const = default;
};

struct StreamSpec {
  std::uint64_t seed = 0;
  StreamId id;
  const char* algorithm = kStreamAlgorithm;

  StreamSpec with_block(std::uint64_t block) const {
    StreamSpec s = *this;
    s.id.block = block;
    return s;
  }
  StreamSpec with_replica(std::uint64_t replica) const {
    StreamSpec s = *this;
    s.id.replica = replica;
    return s;
  }
};

/// Stream key: k = mix64(seed), then k = mix64(k ^ mix64(f + n * golden)) folded over
/// the id fields f = scenario, replica, block (n = 1, 2, 3).
constexpr std::uint64_t stream_key(std::uint64_t seed, const StreamId& id) {
  std::uint64_t k = mix64(seed);
  k = mix64(k ^ mix64(id.scenario + 1 * kGolden));
  k = mix64(k ^ mix64(id.replica + 2 * kGolden));
  k = mix64(k ^ mix64(id.block + 3 * kGolden));
  return k;
}

/// Counter-based generator: word(c) = mix64(key ^ mix64(c * golden)), so
/// distinct counters of one stream never repeat a word. Satisfies
/// UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng() = default;
  explicit CounterRng(const StreamSpec& spec) : key_(stream_key(spec.seed, spec.id)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return word(counter_++); }
  result_type word(std::uint64_t counter) const { return mix64(key_ ^ mix64(counter * kGolden)); }

  /// Uniform on the open interval (0, 1): ((w >> 12) + 1/2) / 2^52. With 52
  /// bits the largest value 1 - 2^-53 is representable, so 1 is never returned.
  double uniform_open() { return (static_cast<double>((*this)() >> 12) + 0.5) * 0x1.0p-52; }
  double exponential(double rate) { return -std::log(uniform_open()) / rate; }

  std::uint64_t counter() const { return counter_; }
  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

inline CounterRng derive_stream(const StreamSpec& spec) { return CounterRng(spec); }

struct Event {
  double time = 0.0;
  double mark = 0.0;
  std::uint64_t block = kGlobalClockBlock;
};

struct EventStream {
  std::vector<Event> events;
  MarkWindow window;
  double rate = 0.0;
};

namespace detail {

/// Each event consumes two words: the gap, then the mark.
inline bool next_event(CounterRng& rng, const MarkWindow& window, double rate, double& clock, double horizon, Event& out) {
  clock += rng.exponential(rate);
  const double mark = window.sample(rng.uniform_open());
  if (clock > horizon) return false;
  out.time = clock;
  out.mark = mark;
  return true;
}

}  // namespace detail

/// Poisson events on [0, horizon] with rate m(window), marks uniform on the window.
inline EventStream global_clock(const MarkWindow& window, double horizon, const StreamSpec& spec) {
  require(horizon > 0.0 && std::isfinite(horizon), "global_clock: horizon must be positive");
  const double rate = window.measure();
  require(rate > 0.0 && std::isfinite(rate), "global_clock: window has zero measure");
  EventStream out{{}, window, rate};
  CounterRng rng(spec);
  double clock = 0.0;
  Event e;
  e.block = spec.id.block;
  out.events.reserve(static_cast<std::size_t>(rate * horizon * 1.2) + 8);
  while (detail::next_event(rng, window, rate, clock, horizon, e)) out.events.push_back(e);
  return out;
}

/// One Poisson stream per block U_s of a BlockGeometry, activated lazily. A
/// block's stream is a pure function of (spec, s), generated incrementally
/// from counter 0, so the time at which it is first consulted does not change
/// its events. Block s uses the stream id with block = s + 1, which makes a
/// single block streamwise identical to global_clock on that block.
class BlockClockEnsemble {
 public:
  BlockClockEnsemble(BlockGeometry geometry, double horizon, StreamSpec spec)
      : geometry_(geometry), horizon_(horizon), spec_(spec) {
    require(horizon > 0.0 && std::isfinite(horizon), "block_clock_ensemble: horizon must be positive");
  }

  const BlockGeometry& geometry() const { return geometry_; }
  double horizon() const { return horizon_; }

  void activate(State s) { block(s); }
  bool active(State s) const { return blocks_.count(s) != 0; }
  std::vector<State> active_blocks() const {
    std::vector<State> out;
    for (const auto& [s, b] : blocks_) out.push_back(s);
    return out;
  }

  /// First event of block s strictly after time t, or nullptr if none before the horizon.
  const Event* next_after(State s, double t) {
    Block& b = block(s);
    while (!b.exhausted && (b.events.empty() || b.events.back().time <= t)) extend(b);
    auto it = std::upper_bound(b.events.begin(), b.events.end(), t, [](double v, const Event& e) { return v < e.time; });
    return it == b.events.end() ? nullptr : &*it;
  }

  /// Every event of the active blocks on [0, horizon], in time order.
  EventStream merged() {
    EventStream out;
    for (auto& [s, b] : blocks_) {
      while (!b.exhausted) extend(b);
      out.events.insert(out.events.end(), b.events.begin(), b.events.end());
      out.window.segments.push_back(b.window.segments.front());
      out.rate += b.rate;
    }
    std::sort(out.events.begin(), out.events.end(), [](const Event& a, const Event& b) {
      return a.time < b.time || (a.time == b.time && a.block < b.block);
    });
    std::sort(out.window.segments.begin(), out.window.segments.end(), [](const auto& a, const auto& b) { return a.lo < b.lo; });
    return out;
  }

 private:
  struct Block {
    CounterRng rng;
    MarkWindow window;
    double rate = 0.0;
    double clock = 0.0;
    bool exhausted = false;
    std::vector<Event> events;
    std::uint64_t id = 0;
  };

  Block& block(State s) {
    auto it = blocks_.find(s);
    if (it != blocks_.end()) return it->second;
    Block b;
    b.id = block_id_of_state(s);
    b.rng = CounterRng(spec_.with_block(b.id));
    b.window.segments.push_back(geometry_.block(s));
    b.rate = b.window.measure();
    require(b.rate > 0.0, "block_clock_ensemble: block has zero measure");
    return blocks_.emplace(s, std::move(b)).first->second;
  }

  void extend(Block& b) {
    constexpr int kChunk = 16;
    Event e;
    e.block = b.id;
    for (int k = 0; k < kChunk; ++k) {
      if (!detail::next_event(b.rng, b.window, b.rate, b.clock, horizon_, e)) {
        b.exhausted = true;
        return;
      }
      b.events.push_back(e);
    }
  }

  BlockGeometry geometry_;
  double horizon_;
  StreamSpec spec_;
  std::map<State, Block> blocks_;
};

/// Debug dump: "n zeta xi block", n from 1, fixed decimal.
inline void dump_events(std::ostream& out, const EventStream& stream) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::fixed << std::setprecision(12);
  std::size_t n = 1;
  for (const auto& e : stream.events) out << n++ << ' ' << e.time << ' ' << e.mark << ' ' << e.block << '\n';
  out.flags(flags);
  out.precision(prec);
}

}  // namespace switchbound
