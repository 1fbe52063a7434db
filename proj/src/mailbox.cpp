#include "biggp/error.hpp"
#include "biggp/message.hpp"

namespace biggp {

namespace {

bool is_control(const Message& m) {
  Phase p = phase_label(m.tag.phase);
  return p == Phase::Command || p == Phase::Hello;
}

}  // namespace

bool Mailbox::stale_locked(const Message& m) const {
  if (is_control(m) || phase_label(m.tag.phase) == Phase::Reply) return false;
  std::uint32_t e = phase_epoch(m.tag.phase);
  // 24-bit wrapping comparison: anything "behind" the current epoch is stale.
  return ((epoch_ - e) & kEpochMask) != 0 && ((epoch_ - e) & kEpochMask) < (kEpochMask / 2);
}

void Mailbox::deliver(Message m) {
  {
    std::lock_guard lock(mu_);
    if (phase_label(m.tag.phase) == Phase::Abort) {
      aborted_epoch_ = phase_epoch(m.tag.phase);
    } else if (is_control(m)) {
      commands_.push_back(std::move(m));
    } else if (!stale_locked(m)) {
      Key key{m.src, m.tag.name, m.tag.phase, m.tag.row, m.tag.col};
      queues_[key].push_back(std::move(m));
    }
  }
  cv_.notify_all();
}

void Mailbox::check_interrupt_locked() const {
  if (closed_) throw Error(crashed_ ? ErrorKind::WorkerCrashed : ErrorKind::ClusterDown, *closed_);
  if (aborted_epoch_ && *aborted_epoch_ == epoch_)
    throw Error(ErrorKind::Aborted, "collective aborted by a peer");
}

Message Mailbox::take(int src, const Tag& tag) {
  Key key{src, tag.name, tag.phase, tag.row, tag.col};
  std::unique_lock lock(mu_);
  for (;;) {
    auto it = queues_.find(key);
    if (it != queues_.end() && !it->second.empty()) {
      Message m = std::move(it->second.front());
      it->second.pop_front();
      if (it->second.empty()) queues_.erase(it);
      return m;
    }
    check_interrupt_locked();
    cv_.wait(lock);
  }
}

Message Mailbox::take_label(int src, Phase label) {
  std::unique_lock lock(mu_);
  for (;;) {
    for (auto it = queues_.begin(); it != queues_.end(); ++it) {
      const Message& front = it->second.front();
      if (front.src == src && phase_label(front.tag.phase) == label) {
        Message m = std::move(it->second.front());
        it->second.pop_front();
        if (it->second.empty()) queues_.erase(it);
        return m;
      }
    }
    if (closed_) throw Error(crashed_ ? ErrorKind::WorkerCrashed : ErrorKind::ClusterDown, *closed_);
    cv_.wait(lock);
  }
}

Message Mailbox::take_command() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !commands_.empty() || closed_; });
  if (commands_.empty()) throw Error(ErrorKind::ClusterDown, *closed_);
  Message m = std::move(commands_.front());
  commands_.pop_front();
  return m;
}

void Mailbox::begin_epoch(std::uint32_t epoch) {
  std::lock_guard lock(mu_);
  epoch_ = epoch & kEpochMask;
  for (auto it = queues_.begin(); it != queues_.end();) {
    if (stale_locked(it->second.front()))
      it = queues_.erase(it);
    else
      ++it;
  }
}

void Mailbox::close(const std::string& reason, bool crashed) {
  {
    std::lock_guard lock(mu_);
    if (!closed_) {
      closed_ = reason;
      crashed_ = crashed;
    }
  }
  cv_.notify_all();
}

std::size_t Mailbox::pending() const {
  std::lock_guard lock(mu_);
  std::size_t total = commands_.size();
  for (const auto& [key, q] : queues_) total += q.size();
  return total;
}

}  // namespace biggp
