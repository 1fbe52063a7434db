#pragma once

/** @file
 *
 * Master-side handle to P workers and their object stores.
 *
 * The master issues one collective at a time. Each collective sends a
 * command to the participating workers, which may exchange messages among
 * themselves, and waits for every reply. If any worker fails, its peers are
 * aborted and the first failure (lowest rank) is rethrown on the master with
 * its rank attached.
 */

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "biggp/grid.hpp"
#include <nlohmann/json.hpp>

namespace biggp {

enum class BackendKind { InProcess, Socket };

const char* to_string(BackendKind kind);
BackendKind backend_from_string(const std::string& name);

struct ClusterOptions {
  int workers = 1;
  BackendKind backend = BackendKind::InProcess;
  std::uint64_t seed = 0;
  /// Thread budget of the local numeric kernels on each worker.
  int threads_per_worker = 1;
  bool event_log = false;

  // Socket backend only.
  /// Executable started as `<exe> worker --connect host:port --rank r`.
  std::string worker_executable;
  std::string host = "127.0.0.1";
  /// 0 picks a free port.
  int port = 0;
  /// When false the master waits for externally launched workers.
  bool launch_workers = true;
};

/// One entry of the block-operation event log.
struct Event {
  std::int64_t time_ns;
  int rank;
  std::string op;
  int row;
  int col;
};

/// Per-worker instrumentation from the last Cholesky factorization.
struct KernelStats {
  int rank;
  long owned_blocks;
  long peak_resident_blocks;
};

/// Name of the runtime metadata object every worker holds from spawn on.
inline constexpr const char* kRuntimeObject = ".biggp";

class Cluster {
 public:
  struct Reply {
    int rank;
    nlohmann::json info;
    std::vector<double> payload;
  };

  /// Throws NotTriangularNumber or BackendUnavailable.
  static Cluster spawn(const ClusterOptions& options);
  static Cluster spawn(int workers, BackendKind backend = BackendKind::InProcess,
                       std::uint64_t seed = 0);

  Cluster(Cluster&&) noexcept;
  Cluster& operator=(Cluster&&) noexcept;
  ~Cluster();

  const ProcessGrid& grid() const;
  int size() const { return grid().size(); }
  BackendKind backend() const;
  std::uint64_t seed() const;
  bool running() const;
  void shutdown();

  /// Copies value into the store of each target (all workers when empty).
  void push(const std::string& name, std::span<const double> value, std::vector<int> targets = {});
  std::vector<double> pull(const std::string& name, int rank);
  std::vector<std::string> remote_ls(int rank);
  /// Removes name on the targets; absent names are ignored.
  void remove(const std::string& name, std::vector<int> targets = {});
  /// output = fn(inputs...) on every worker's local pieces.
  void remote_apply(const std::string& function, const std::vector<std::string>& inputs,
                    const std::string& output);

  /// Layout of a distributed object known to the master. Throws NoSuchObject.
  const DistLayout& layout_of(const std::string& name) const;
  bool has_distributed(const std::string& name) const;
  /// Records the layout of an object the workers just created.
  void register_layout(const std::string& name, const DistLayout& layout);

  void set_event_logging(bool enabled);
  /// Gathers and clears all event logs (workers and master), ordered by time.
  std::vector<Event> take_events();
  std::vector<KernelStats> last_kernel_stats() const;
  void set_kernel_stats(std::vector<KernelStats> stats);

  /**
   * Low-level collective: sends op with args to every target (all workers
   * when empty) and returns the replies in rank order. `payload` supplies
   * the per-rank message body.
   */
  std::vector<Reply> collective(const std::string& op, nlohmann::json args,
                                const std::function<std::vector<double>(int rank)>& payload = {},
                                std::vector<int> targets = {});

  class Impl;

 private:
  explicit Cluster(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

/// Entry point of a socket-backend worker process. Returns the exit status.
int run_socket_worker(const std::string& host, int port, int rank);

}  // namespace biggp
