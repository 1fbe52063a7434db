#include <thread>
#include <vector>

#include "backend.hpp"
#include "worker.hpp"

namespace biggp::detail {

namespace {

class InProcessBackend;

class InProcessLink final : public Link {
 public:
  InProcessLink(InProcessBackend& hub, int rank) : hub_(hub), rank_(rank) {}
  void send(Message m) override;
  Mailbox& mailbox() override;

 private:
  InProcessBackend& hub_;
  int rank_;
};

// Every worker runs on its own thread with a private store. Payload vectors
// are moved into the destination mailbox; senders always build a fresh
// vector, so no buffer is shared between workers.
class InProcessBackend final : public Backend {
 public:
  explicit InProcessBackend(int workers) : mailboxes_(static_cast<std::size_t>(workers) + 1) {
    for (int r = 1; r <= workers; ++r) links_.push_back(std::make_unique<InProcessLink>(*this, r));
    for (int r = 1; r <= workers; ++r)
      threads_.emplace_back([this, r] {
        Worker w(r, *links_[static_cast<std::size_t>(r - 1)]);
        w.run();
      });
  }

  ~InProcessBackend() override { close(); }

  void deliver(Message m) { mailboxes_.at(static_cast<std::size_t>(m.dst)).deliver(std::move(m)); }
  Mailbox& mailbox(int rank) { return mailboxes_.at(static_cast<std::size_t>(rank)); }

  void send(Message m) override { deliver(std::move(m)); }
  Mailbox& master_mailbox() override { return mailboxes_[0]; }

  void close() override {
    for (auto& mb : mailboxes_) mb.close("cluster is shut down");
    for (auto& t : threads_)
      if (t.joinable()) t.join();
  }

 private:
  std::vector<Mailbox> mailboxes_;
  std::vector<std::unique_ptr<InProcessLink>> links_;
  std::vector<std::thread> threads_;
};

void InProcessLink::send(Message m) { hub_.deliver(std::move(m)); }
Mailbox& InProcessLink::mailbox() { return hub_.mailbox(rank_); }

}  // namespace

std::unique_ptr<Backend> make_inprocess_backend(int workers) {
  return std::make_unique<InProcessBackend>(workers);
}

}  // namespace biggp::detail
