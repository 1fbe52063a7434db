#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "biggp/cluster.hpp"
#include "biggp/message.hpp"
#include "biggp/object_store.hpp"
#include "biggp/rng.hpp"
#include <nlohmann/json.hpp>

namespace biggp::detail {

using nlohmann::json;

/// A worker's connection to the rest of the cluster.
class Link {
 public:
  virtual ~Link() = default;
  virtual void send(Message m) = 0;
  virtual Mailbox& mailbox() = 0;
};

std::int64_t now_ns();

class Worker {
 public:
  Worker(int rank, Link& link);

  /// Serves commands until shutdown or until the link closes.
  void run();

  int rank() const noexcept { return rank_; }
  const ProcessGrid& grid() const { return *grid_; }
  Coord coord() const { return coord_; }
  int rank_of(Coord c) const { return grid_->rank(c); }
  WorkerInfo info() const { return {rank_, coord_, &*grid_}; }

  ObjectStore& store() { return store_; }
  NormalStream& stream();

  void send(int dst, Phase label, const std::string& name, int row, int col,
            std::vector<double> payload);
  Message recv(int src, Phase label, const std::string& name, int row, int col);

  void send_block(int dst, Phase label, const std::string& name, BlockIndex idx, const Block& b);
  Block recv_block(int src, Phase label, const std::string& name, BlockIndex idx, Index rows,
                   Index cols);

  void log(const char* op, int row, int col);
  bool logging() const noexcept { return logging_; }

  // Resident-block instrument for the Cholesky kernel.
  void reset_residency(long owned);
  void acquire_block();
  void release_block();
  long peak_residency() const noexcept { return peak_resident_; }

  // Used by the built-in store kernels.
  void initialize(int processes, std::uint64_t seed, int threads, bool log_events);
  void set_logging(bool enabled) { logging_ = enabled; }
  std::vector<Event> take_events();

 private:
  void broadcast_abort();

  int rank_;
  Link& link_;
  std::optional<ProcessGrid> grid_;
  Coord coord_;
  ObjectStore store_;
  std::optional<NormalStream> stream_;
  std::uint32_t epoch_ = 0;
  bool logging_ = false;
  std::vector<Event> events_;
  long resident_ = 0;
  long peak_resident_ = 0;
};

/// Kernel run on each worker for one collective. `reply` becomes the
/// payload of the worker's reply; the returned json its info field.
using Kernel = std::function<json(Worker& w, const json& args, const std::vector<double>& payload,
                                  std::vector<double>& reply)>;

const Kernel& find_kernel(const std::string& op);

using KernelTable = std::map<std::string, Kernel>;
void add_store_kernels(KernelTable& table);
void add_linalg_kernels(KernelTable& table);

/// Registers built-in remote functions and generators once per process.
void register_builtins();

// Layout (de)serialization shared by master and workers.
json layout_to_json(const DistLayout& layout);
DistLayout layout_from_json(const json& j, int grid_order);

}  // namespace biggp::detail
