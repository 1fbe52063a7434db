#include "biggp/cluster.hpp"

#include <algorithm>
#include <map>

#include "backend.hpp"
#include "biggp/error.hpp"
#include "worker.hpp"

namespace biggp {

using nlohmann::json;

const char* to_string(BackendKind kind) {
  return kind == BackendKind::Socket ? "socket" : "inprocess";
}

BackendKind backend_from_string(const std::string& name) {
  if (name == "inprocess" || name == "in-process") return BackendKind::InProcess;
  if (name == "socket" || name == "multi-process-socket") return BackendKind::Socket;
  raise(ErrorKind::BackendUnavailable, "unknown backend '" + name + "'");
}

class Cluster::Impl {
 public:
  Impl(const ClusterOptions& opts, ProcessGrid grid) : options(opts), grid(grid) {}

  std::vector<int> all_ranks() const {
    std::vector<int> out(static_cast<std::size_t>(grid.size()));
    for (int r = 1; r <= grid.size(); ++r) out[static_cast<std::size_t>(r - 1)] = r;
    return out;
  }

  std::vector<Reply> collective(const std::string& op, json args,
                                const std::function<std::vector<double>(int)>& payload,
                                std::vector<int> targets) {
    if (!running) raise(ErrorKind::ClusterDown, "cluster is not running");
    if (targets.empty()) targets = all_ranks();
    for (int r : targets)
      if (r < 1 || r > grid.size())
        raise(ErrorKind::InvalidArgument, "rank " + std::to_string(r) + " is out of range");
    epoch = (epoch + 1) & kEpochMask;
    if (logging && op != "events") events.push_back({detail::now_ns(), 0, "collective:" + op, 0, 0});

    const std::string cmd = json{{"op", op}, {"args", std::move(args)}}.dump();
    std::vector<Reply> replies;
    try {
      for (int r : targets) {
        Message m;
        m.src = 0;
        m.dst = r;
        m.tag = {cmd, make_phase(Phase::Command, epoch), 0, 0};
        if (payload) m.payload = payload(r);
        backend->send(std::move(m));
      }
      std::sort(targets.begin(), targets.end());
      for (int r : targets) {
        Message m = backend->master_mailbox().take_label(r, Phase::Reply);
        replies.push_back({r, json::parse(m.tag.name), std::move(m.payload)});
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::WorkerCrashed || e.kind() == ErrorKind::ClusterDown) {
        running = false;
        backend->close();
      }
      throw;
    }

    const Reply* failure = nullptr;
    for (const Reply& r : replies) {
      if (r.info.at("ok").get<bool>()) continue;
      bool aborted = r.info.at("kind").get<std::string>() == "Aborted";
      if (!failure || (!aborted && failure->info.at("kind").get<std::string>() == "Aborted"))
        failure = &r;
    }
    if (failure) {
      std::optional<long> detail;
      if (failure->info.contains("detail")) detail = failure->info["detail"].get<long>();
      throw Error(error_kind_from_string(failure->info.at("kind").get<std::string>()),
                  failure->info.at("message").get<std::string>(), failure->rank, detail);
    }
    for (Reply& r : replies) {
      json info = r.info.contains("info") ? std::move(r.info["info"]) : json{};
      r.info = std::move(info);
    }
    return replies;
  }

  void shutdown() {
    if (!running) return;
    try {
      collective("shutdown", json::object(), {}, {});
    } catch (const Error&) {
    }
    running = false;
    backend->close();
  }

  ClusterOptions options;
  ProcessGrid grid;
  std::unique_ptr<detail::Backend> backend;
  bool running = false;
  std::uint32_t epoch = 0;
  bool logging = false;
  std::vector<Event> events;
  std::map<std::string, DistLayout> layouts;
  std::vector<KernelStats> stats;
};

Cluster::Cluster(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Cluster::Cluster(Cluster&&) noexcept = default;
Cluster& Cluster::operator=(Cluster&& other) noexcept {
  if (this != &other) {
    if (impl_) impl_->shutdown();
    impl_ = std::move(other.impl_);
  }
  return *this;
}

Cluster::~Cluster() {
  if (impl_) impl_->shutdown();
}

Cluster Cluster::spawn(int workers, BackendKind backend, std::uint64_t seed) {
  ClusterOptions o;
  o.workers = workers;
  o.backend = backend;
  o.seed = seed;
  return spawn(o);
}

Cluster Cluster::spawn(const ClusterOptions& options) {
  ProcessGrid grid = ProcessGrid::from_process_count(options.workers);
  auto impl = std::make_unique<Impl>(options, grid);
  impl->backend = options.backend == BackendKind::Socket
                      ? detail::make_socket_backend(options, grid.size())
                      : detail::make_inprocess_backend(grid.size());
  impl->running = true;
  impl->logging = options.event_log;
  json args = {{"processes", grid.size()},
               {"seed_lo", options.seed & 0xFFFFFFFFu},
               {"seed_hi", options.seed >> 32},
               {"threads", options.threads_per_worker},
               {"log", options.event_log}};
  impl->collective("init", args, {}, {});
  return Cluster(std::move(impl));
}

const ProcessGrid& Cluster::grid() const { return impl_->grid; }
BackendKind Cluster::backend() const { return impl_->options.backend; }
std::uint64_t Cluster::seed() const { return impl_->options.seed; }
bool Cluster::running() const { return impl_ && impl_->running; }

void Cluster::shutdown() { impl_->shutdown(); }

std::vector<Cluster::Reply> Cluster::collective(
    const std::string& op, json args, const std::function<std::vector<double>(int)>& payload,
    std::vector<int> targets) {
  if (!impl_) raise(ErrorKind::ClusterDown, "cluster handle was moved from");
  return impl_->collective(op, std::move(args), payload, std::move(targets));
}

void Cluster::push(const std::string& name, std::span<const double> value,
                   std::vector<int> targets) {
  std::vector<double> copy(value.begin(), value.end());
  collective("push", {{"name", name}}, [&](int) { return copy; }, std::move(targets));
  impl_->layouts.erase(name);
}

std::vector<double> Cluster::pull(const std::string& name, int rank) {
  auto replies = collective("pull", {{"name", name}}, {}, {rank});
  return std::move(replies.front().payload);
}

std::vector<std::string> Cluster::remote_ls(int rank) {
  auto replies = collective("ls", json::object(), {}, {rank});
  return replies.front().info.get<std::vector<std::string>>();
}

void Cluster::remove(const std::string& name, std::vector<int> targets) {
  bool everywhere = targets.empty();
  collective("rm", {{"name", name}}, {}, std::move(targets));
  if (everywhere) impl_->layouts.erase(name);
}

void Cluster::remote_apply(const std::string& function, const std::vector<std::string>& inputs,
                           const std::string& output) {
  collective("apply", {{"fn", function}, {"inputs", inputs}, {"output", output}});
  auto it = std::find_if(inputs.begin(), inputs.end(),
                         [&](const std::string& n) { return impl_->layouts.count(n) != 0; });
  if (it != inputs.end())
    impl_->layouts[output] = impl_->layouts.at(*it);
  else
    impl_->layouts.erase(output);
}

const DistLayout& Cluster::layout_of(const std::string& name) const {
  auto it = impl_->layouts.find(name);
  if (it == impl_->layouts.end())
    raise(ErrorKind::NoSuchObject, "no distributed object named '" + name + "'");
  return it->second;
}

bool Cluster::has_distributed(const std::string& name) const {
  return impl_->layouts.count(name) != 0;
}

void Cluster::register_layout(const std::string& name, const DistLayout& layout) {
  impl_->layouts[name] = layout;
}

void Cluster::set_event_logging(bool enabled) {
  collective("events", {{"enable", enabled}});
  impl_->logging = enabled;
}

std::vector<Event> Cluster::take_events() {
  auto replies = collective("events", {{"take", true}});
  std::vector<Event> out;
  out.swap(impl_->events);
  for (const Reply& r : replies)
    for (const json& e : r.info)
      out.push_back({e[0].get<std::int64_t>(), e[1].get<int>(), e[2].get<std::string>(),
                     e[3].get<int>(), e[4].get<int>()});
  std::stable_sort(out.begin(), out.end(),
                   [](const Event& a, const Event& b) { return a.time_ns < b.time_ns; });
  return out;
}

std::vector<KernelStats> Cluster::last_kernel_stats() const { return impl_->stats; }
void Cluster::set_kernel_stats(std::vector<KernelStats> stats) { impl_->stats = std::move(stats); }

}  // namespace biggp
