#pragma once

#include <memory>

#include "biggp/cluster.hpp"
#include "biggp/message.hpp"

namespace biggp::detail {

/// Master-side transport: delivers messages to workers and owns the
/// master's mailbox.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual void send(Message m) = 0;
  virtual Mailbox& master_mailbox() = 0;
  /// Tears down the transport after workers acknowledged shutdown (or died).
  virtual void close() = 0;
};

std::unique_ptr<Backend> make_inprocess_backend(int workers);
std::unique_ptr<Backend> make_socket_backend(const ClusterOptions& options, int workers);

}  // namespace biggp::detail
