#include "worker.hpp"

#include <algorithm>
#include <mutex>

#ifdef BIGGP_HAVE_OPENMP
#include <omp.h>
#endif

#include "biggp/error.hpp"

namespace biggp::detail {

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

json layout_to_json(const DistLayout& layout) {
  return {{"kind", to_string(layout.kind())},
          {"n", layout.rows().size()},
          {"hn", layout.rows().replication()},
          {"m", layout.cols().size()},
          {"hm", layout.cols().replication()}};
}

DistLayout layout_from_json(const json& j, int grid_order) {
  ObjectKind kind = object_kind_from_string(j.at("kind").get<std::string>());
  BlockLayout rows(j.at("n").get<Index>(), j.at("hn").get<int>(), grid_order);
  switch (kind) {
    case ObjectKind::Triangular: return DistLayout::triangular(rows);
    case ObjectKind::Vector: return DistLayout::vector(rows);
    case ObjectKind::Rectangular:
      return DistLayout::rectangular(
          rows, BlockLayout(j.at("m").get<Index>(), j.at("hm").get<int>(), grid_order));
  }
  return DistLayout::vector(rows);
}

Worker::Worker(int rank, Link& link) : rank_(rank), link_(link) { register_builtins(); }

NormalStream& Worker::stream() {
  if (!stream_) raise(ErrorKind::StreamsUninitialized, "worker stream has not been initialized");
  return *stream_;
}

void Worker::initialize(int processes, std::uint64_t seed, int threads, bool log_events) {
  grid_ = ProcessGrid::from_process_count(processes);
  coord_ = grid_->coord(rank_);
  stream_.emplace(seed, rank_);
  logging_ = log_events;
#ifdef BIGGP_HAVE_OPENMP
  omp_set_num_threads(std::max(1, threads));
#else
  (void)threads;
#endif
  LocalObject meta;
  meta.values = {static_cast<double>(grid_->order()), static_cast<double>(processes),
                 static_cast<double>(rank_), static_cast<double>(coord_.row),
                 static_cast<double>(coord_.col), static_cast<double>(seed & 0xFFFFFFFFu),
                 static_cast<double>(seed >> 32)};
  store_.put(kRuntimeObject, std::move(meta));
}

void Worker::send(int dst, Phase label, const std::string& name, int row, int col,
                  std::vector<double> payload) {
  Message m;
  m.src = rank_;
  m.dst = dst;
  m.tag = {name, make_phase(label, epoch_), static_cast<std::uint32_t>(row),
           static_cast<std::uint32_t>(col)};
  m.payload = std::move(payload);
  link_.send(std::move(m));
}

Message Worker::recv(int src, Phase label, const std::string& name, int row, int col) {
  Tag tag{name, make_phase(label, epoch_), static_cast<std::uint32_t>(row),
          static_cast<std::uint32_t>(col)};
  return link_.mailbox().take(src, tag);
}

void Worker::send_block(int dst, Phase label, const std::string& name, BlockIndex idx,
                        const Block& b) {
  send(dst, label, name, idx.row, idx.col, std::vector<double>(b.data(), b.data() + b.size()));
}

Block Worker::recv_block(int src, Phase label, const std::string& name, BlockIndex idx,
                         Index rows, Index cols) {
  Message m = recv(src, label, name, idx.row, idx.col);
  if (static_cast<Index>(m.payload.size()) != rows * cols)
    raise(ErrorKind::Internal, "block message has the wrong size");
  return Eigen::Map<const Block>(m.payload.data(), rows, cols);
}

void Worker::log(const char* op, int row, int col) {
  if (logging_) events_.push_back({now_ns(), rank_, op, row, col});
}

std::vector<Event> Worker::take_events() {
  std::vector<Event> out;
  out.swap(events_);
  return out;
}

void Worker::reset_residency(long owned) { resident_ = peak_resident_ = owned; }

void Worker::acquire_block() {
  ++resident_;
  peak_resident_ = std::max(peak_resident_, resident_);
}

void Worker::release_block() { --resident_; }

void Worker::broadcast_abort() {
  if (!grid_) return;
  for (int r = 1; r <= grid_->size(); ++r) {
    if (r == rank_) continue;
    Message m;
    m.src = rank_;
    m.dst = r;
    m.tag = {"", make_phase(Phase::Abort, epoch_), 0, 0};
    link_.send(std::move(m));
  }
}

void Worker::run() {
  for (;;) {
    Message cmd;
    try {
      cmd = link_.mailbox().take_command();
    } catch (const Error&) {
      return;
    }
    epoch_ = phase_epoch(cmd.tag.phase);
    link_.mailbox().begin_epoch(epoch_);
    json reply_info;
    std::vector<double> reply_payload;
    bool stop = false;
    try {
      json c = json::parse(cmd.tag.name);
      const std::string op = c.at("op").get<std::string>();
      if (op == "shutdown") {
        stop = true;
        reply_info = {{"ok", true}};
      } else {
        if (!grid_ && op != "init") raise(ErrorKind::ClusterDown, "worker is not initialized");
        json info = find_kernel(op)(*this, c.at("args"), cmd.payload, reply_payload);
        reply_info = {{"ok", true}, {"info", std::move(info)}};
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Aborted) broadcast_abort();
      reply_info = {{"ok", false}, {"kind", to_string(e.kind())}, {"message", e.message()}};
      if (e.detail()) reply_info["detail"] = *e.detail();
      reply_payload.clear();
    } catch (const std::exception& e) {
      broadcast_abort();
      reply_info = {{"ok", false}, {"kind", "Internal"}, {"message", e.what()}};
      reply_payload.clear();
    }
    Message reply;
    reply.src = rank_;
    reply.dst = 0;
    reply.tag = {reply_info.dump(), make_phase(Phase::Reply, epoch_), 0, 0};
    reply.payload = std::move(reply_payload);
    link_.send(std::move(reply));
    if (stop) return;
  }
}

namespace {

KernelTable build_table() {
  KernelTable t;
  add_store_kernels(t);
  add_linalg_kernels(t);
  return t;
}

// Concatenation of a local object's data: values, or owned blocks in order.
std::vector<double> flatten(const LocalObject& obj, const Worker& w) {
  if (!obj.distributed()) return obj.values;
  std::vector<double> out;
  out.reserve(obj.size());
  for (BlockIndex b : obj.layout->owned_blocks(w.coord(), w.grid())) {
    const Block& blk = obj.blocks.at(b);
    out.insert(out.end(), blk.data(), blk.data() + blk.size());
  }
  return out;
}

json kernel_init(Worker& w, const json& args, const std::vector<double>&, std::vector<double>&) {
  std::uint64_t seed = args.at("seed_lo").get<std::uint64_t>() |
                       args.at("seed_hi").get<std::uint64_t>() << 32;
  w.initialize(args.at("processes").get<int>(), seed, args.value("threads", 1),
               args.value("log", false));
  return {{"coord", {w.coord().row, w.coord().col}}};
}

json kernel_push(Worker& w, const json& args, const std::vector<double>& payload,
                 std::vector<double>&) {
  LocalObject obj;
  obj.values = payload;
  w.store().put(args.at("name").get<std::string>(), std::move(obj));
  return {};
}

json kernel_pull(Worker& w, const json& args, const std::vector<double>&,
                 std::vector<double>& reply) {
  reply = flatten(w.store().get(args.at("name").get<std::string>()), w);
  return {};
}

json kernel_ls(Worker& w, const json&, const std::vector<double>&, std::vector<double>&) {
  return w.store().names();
}

json kernel_rm(Worker& w, const json& args, const std::vector<double>&, std::vector<double>&) {
  w.store().erase(args.at("name").get<std::string>());
  return {};
}

json kernel_apply(Worker& w, const json& args, const std::vector<double>&, std::vector<double>&) {
  const RemoteFunction& fn = find_function(args.at("fn").get<std::string>());
  auto inputs = args.at("inputs").get<std::vector<std::string>>();
  if (inputs.empty() || inputs.size() > 2)
    raise(ErrorKind::InvalidArgument, "remote_apply takes one or two inputs");
  const LocalObject& first = w.store().get(inputs[0]);
  const LocalObject* second = inputs.size() == 2 ? &w.store().get(inputs[1]) : nullptr;
  LocalObject out = fn(first, second, w.info());
  if (out.layout)
    for (auto& [idx, blk] : out.blocks) reset_padding(blk, idx, *out.layout);
  w.store().put(args.at("output").get<std::string>(), std::move(out));
  return {};
}

json kernel_events(Worker& w, const json& args, const std::vector<double>&,
                   std::vector<double>&) {
  if (args.contains("enable")) w.set_logging(args["enable"].get<bool>());
  json out = json::array();
  if (args.value("take", false))
    for (const Event& e : w.take_events()) out.push_back({e.time_ns, e.rank, e.op, e.row, e.col});
  return out;
}

json kernel_indices(Worker& w, const json& args, const std::vector<double>&,
                    std::vector<double>& reply) {
  DistLayout layout = layout_from_json(args.at("layout"), w.grid().order());
  for (const ElementIndex& e : local_index_sets(layout, w.coord(), w.grid())) {
    reply.push_back(static_cast<double>(e.row));
    reply.push_back(static_cast<double>(e.col));
    reply.push_back(e.padded ? 1.0 : 0.0);
  }
  return {};
}

json kernel_draws(Worker& w, const json& args, const std::vector<double>&,
                  std::vector<double>& reply) {
  reply.resize(args.at("count").get<std::size_t>());
  w.stream().fill(reply);
  return {};
}

// Each worker fills its owned blocks, padding included, from its own stream
// in owned-block order; padded entries are then reset to zero.
json kernel_rnorm(Worker& w, const json& args, const std::vector<double>&, std::vector<double>&) {
  DistLayout layout = layout_from_json(args.at("layout"), w.grid().order());
  bool zero = args.value("zero", false);
  LocalObject obj;
  obj.layout = layout;
  for (BlockIndex b : layout.owned_blocks(w.coord(), w.grid())) {
    Block blk(layout.block_rows(), layout.block_cols());
    if (zero)
      blk.setZero();
    else
      w.stream().fill(std::span<double>(blk.data(), static_cast<std::size_t>(blk.size())));
    reset_padding(blk, b, layout);
    obj.blocks.emplace(b, std::move(blk));
  }
  w.store().put(args.at("name").get<std::string>(), std::move(obj));
  return {};
}

}  // namespace

const Kernel& find_kernel(const std::string& op) {
  static const KernelTable table = build_table();
  auto it = table.find(op);
  if (it == table.end()) raise(ErrorKind::UnknownFunction, "no kernel '" + op + "'");
  return it->second;
}

void add_store_kernels(KernelTable& t) {
  t["init"] = kernel_init;
  t["push"] = kernel_push;
  t["pull"] = kernel_pull;
  t["ls"] = kernel_ls;
  t["rm"] = kernel_rm;
  t["apply"] = kernel_apply;
  t["events"] = kernel_events;
  t["indices"] = kernel_indices;
  t["draws"] = kernel_draws;
  t["rnorm"] = kernel_rnorm;
}

}  // namespace biggp::detail
