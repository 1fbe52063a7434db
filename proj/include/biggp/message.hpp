#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace biggp {

/// Phase labels occupy the low byte of Tag::phase; the collective epoch the
/// remaining 24 bits.
enum class Phase : std::uint8_t {
  Command = 1,
  Reply = 2,
  Abort = 3,
  Hello = 4,
  Data = 10,
  CholFactor = 20,
  CholPanel = 21,
  CholTrailing = 22,
  SolveRhs = 30,
  SolvePartial = 31,
  Product = 40,
  ProductPartial = 41,
  Collect = 50,
};

constexpr std::uint32_t kEpochMask = 0xFFFFFFu;

constexpr std::uint32_t make_phase(Phase label, std::uint32_t epoch) {
  return (epoch & kEpochMask) << 8 | static_cast<std::uint32_t>(label);
}
constexpr Phase phase_label(std::uint32_t phase) { return static_cast<Phase>(phase & 0xFFu); }
constexpr std::uint32_t phase_epoch(std::uint32_t phase) { return phase >> 8; }

struct Tag {
  std::string name;
  std::uint32_t phase = 0;
  std::uint32_t row = 0;
  std::uint32_t col = 0;

  bool operator==(const Tag&) const = default;
};

/// Rank 0 is the master; workers are 1..P.
struct Message {
  int src = 0;
  int dst = 0;
  Tag tag;
  std::vector<double> payload;
};

/**
 * Per-endpoint receive queue with (src, tag) matching.
 *
 * Messages for one (src, tag) pair are handed out in delivery order. When a
 * collective aborts, a waiting take() throws Aborted and messages from the
 * aborted epoch are discarded at the next begin_epoch().
 */
class Mailbox {
 public:
  void deliver(Message m);

  /// Blocks until a message from src with exactly this tag is available.
  Message take(int src, const Tag& tag);
  /// Next command from the master, in arrival order.
  Message take_command();
  /// Next message from src carrying the given phase label, any tag name.
  Message take_label(int src, Phase label);

  void begin_epoch(std::uint32_t epoch);
  /// Wakes waiters with ClusterDown/WorkerCrashed; subsequent takes throw.
  void close(const std::string& reason, bool crashed = false);

  std::size_t pending() const;

 private:
  using Key = std::tuple<int, std::string, std::uint32_t, std::uint32_t, std::uint32_t>;

  void check_interrupt_locked() const;
  bool stale_locked(const Message& m) const;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<Key, std::deque<Message>> queues_;
  std::deque<Message> commands_;
  std::uint32_t epoch_ = 0;
  std::optional<std::uint32_t> aborted_epoch_;
  std::optional<std::string> closed_;
  bool crashed_ = false;
};

}  // namespace biggp
