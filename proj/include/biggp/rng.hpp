#pragma once

/** @file
 *
 * Reproducible per-worker normal streams.
 *
 * Each worker draws from a Philox4x32-10 counter-based generator keyed by
 * the master seed; the worker rank occupies the high counter word, so the
 * streams of distinct ranks never share a counter value. Normals come from
 * the inverse normal CDF applied to 53-bit uniforms, which keeps the draws
 * identical across platforms and backends.
 *
 * Realized draws depend on (seed, P, h): changing the process count or the
 * replication factor changes which stream fills which matrix entry.
 */

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace biggp {

/// Philox4x32 with 10 rounds.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter counter, Key key);
};

/// One worker's stream of standard normals, positioned by draw count.
class NormalStream {
 public:
  NormalStream(std::uint64_t master_seed, int rank);

  double next();
  void fill(std::span<double> out);
  std::uint64_t position() const noexcept { return position_; }
  void seek(std::uint64_t position) noexcept { position_ = position; }

  /// The normal at an absolute stream position; does not move the stream.
  double at(std::uint64_t position) const;

 private:
  Philox4x32::Key key_;
  std::uint32_t rank_;
  std::uint64_t position_ = 0;
};

/// Per-rank streams for a cluster of P workers.
class StreamFamily {
 public:
  StreamFamily() = default;

  void initialize(std::uint64_t master_seed, int processes);
  bool initialized() const noexcept { return seed_.has_value(); }
  std::uint64_t master_seed() const;

  /// Stream of the given rank (1-based). Throws StreamsUninitialized before initialize().
  NormalStream& stream(int rank);

 private:
  std::optional<std::uint64_t> seed_;
  std::vector<NormalStream> streams_;
};

/// Convenience: the first count draws of a fresh stream for (seed, rank).
std::vector<double> standard_normals(std::uint64_t master_seed, int rank, std::size_t count);

}  // namespace biggp
